"""Command-line driver: ``chernforms run FILE``, ``list-scenarios``, ``verify-all``.

Exit status is 0 when every check passes, 1 when a numeric check fails and
2 when a scenario cannot be parsed.
"""

from __future__ import annotations

import argparse
import csv
import sys
from importlib import resources
from pathlib import Path

from .scenario import RunOptions, ScenarioError, load_scenario, parse_lambdas, run_scenario
from .currents import write_samples_csv

CONVENTIONS = (
    "aleph = i/(2 pi); d^c = aleph (dbar - del), hence dd^c = 2 aleph del dbar",
    "<xi, eta> = eta^H G xi; theta = G^-1 del G; Theta = dbar theta",
    "c(D) = det(aleph Theta + I) = int_e exp(aleph Theta~ + I~), I~ = sum e_j e*_j",
    "Berezin integral normalised by int_e I~_m = 1 (top e, e* monomial, sign (-1)^(m(m-1)/2))",
    "(a)_k denotes a^k/k!; masses are paired with a bump chi, chi(centre) = 1",
)
SUMMARY_COLUMNS = ["check_id", "paper_ref", "value", "target", "tol", "status"]


def shipped_scenarios() -> list:
    root = resources.files("chernforms") / "scenarios"
    return sorted((p for p in root.iterdir() if p.name.endswith(".ini")), key=lambda p: p.name)


def _fmt(x: float) -> str:
    return f"{x:.10e}"


def write_report(path: Path, results) -> None:
    lines = ["chernforms verification report", "", "conventions:"]
    lines += [f"  {c}" for c in CONVENTIONS]
    for res in results:
        scn = res.scenario
        lines += ["", f"scenario {scn.name}  (n = {scn.n}, rank = {scn.rank}, metric = {scn.metric})",
                  f"  anchor: {scn.anchor}"]
        for c in res.checks:
            lines.append(f"  {c.status:4s}  {c.check_id}  [{c.anchor}]  value={_fmt(c.value)}  "
                         f"target={_fmt(c.target)}  tol={_fmt(c.tol)}")
    failed = [c.check_id for r in results for c in r.checks if c.status == "FAIL"]
    lines += ["", f"overall: {'FAIL' if failed else 'PASS'}"]
    lines += [f"  failed: {cid}" for cid in failed]
    path.write_text("\n".join(lines) + "\n")


def write_summary(path: Path, results) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for res in results:
            for c in res.checks:
                w.writerow([c.check_id, c.anchor, _fmt(c.value), _fmt(c.target), _fmt(c.tol),
                            c.status])


def _options(args) -> RunOptions:
    lams = None
    if args.lambda_schedule:
        lams = parse_lambdas(args.lambda_schedule, "--lambda-schedule")
    return RunOptions(args.seed, args.jet_order, args.grid, lams, args.jobs)


def _execute(paths, args) -> int:
    try:
        opts = _options(args)
        scenarios = [load_scenario(p) for p in paths]
    except ScenarioError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    results, samples = [], []
    for scn in scenarios:
        print(f"running {scn.name} ...", file=sys.stderr, flush=True)
        try:
            res = run_scenario(scn, opts)
        except ScenarioError as exc:
            print(f"parse error: {exc}", file=sys.stderr)
            return 2
        results.append(res)
        samples += res.samples
    write_report(out / "report.txt", results)
    write_summary(out / "summary.csv", results)
    write_samples_csv(out / "samples.csv", samples)
    failed = [c for r in results for c in r.checks if c.status == "FAIL"]
    for c in failed:
        print(f"FAIL {c.check_id}: value {c.value:.6g}, target {c.target:.6g}, tol {c.tol:.3g}",
              file=sys.stderr)
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    common.add_argument("--jet-order", type=int, default=None, help="jet order for identity checks")
    common.add_argument("--grid", type=int, default=None, help="quadrature level")
    common.add_argument("--lambda-schedule", default=None,
                        help="comma-separated decreasing lambdas, e.g. '2^-1, 2^-2, 2^-3, 2^-4'")
    common.add_argument("--out-dir", default="chernforms-out", help="directory for report files")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for node evaluation")

    parser = argparse.ArgumentParser(prog="chernforms", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", parents=[common], help="run one scenario file")
    run.add_argument("file")
    sub.add_parser("list-scenarios", help="list the shipped scenarios")
    sub.add_parser("verify-all", parents=[common], help="run every shipped scenario")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list-scenarios":
        for p in shipped_scenarios():
            try:
                scn = load_scenario(p)
                print(f"{scn.name:24s} {scn.anchor}")
            except ScenarioError as exc:
                print(f"{p.name}: {exc}", file=sys.stderr)
                return 2
        return 0
    if args.command == "run":
        return _execute([args.file], args)
    return _execute(shipped_scenarios(), args)


if __name__ == "__main__":
    sys.exit(main())
