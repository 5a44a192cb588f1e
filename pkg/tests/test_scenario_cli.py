import csv

import pytest
from hypothesis import given, strategies as st

from chernforms import cli
from chernforms.scenario import (
    RunOptions,
    Scenario,
    ScenarioError,
    TaskSpec,
    load_scenario,
    parse_lambdas,
    parse_scenario,
    run_scenario,
)

SMALL = """
[scenario]
name = small
anchor = simple zero
n = 1
rank = 1
grid = 4

[section]
f1 = z1

[task.mass]
kind = mass
k = 1
target = 1
tol = 0.05
"""


def write(tmp_path, text, name="s.ini"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_every_shipped_scenario_parses_and_names_its_anchor():
    paths = cli.shipped_scenarios()
    assert len(paths) == 14
    for p in paths:
        scn = load_scenario(p)
        assert scn.anchor
        assert scn.tasks


@pytest.mark.parametrize("path", cli.shipped_scenarios(), ids=lambda p: p.name)
def test_shipped_scenarios_round_trip(path):
    scn = load_scenario(path)
    assert parse_scenario(scn.to_ini(), scn.source) == scn


names = st.text(alphabet="abcdefghijklmnopqrstuvwxyz-0123456789", min_size=1, max_size=12)
sections = st.sampled_from(["z1", "z1^2 - 1", "exp(z1) - 1", "2*z1 + i", "z1*(z1 - 3)"])
presets = st.sampled_from(["trivial", "fs(1)", "diag(1 + z1*zb1)"])


@given(names, names, st.integers(0, 10**6), st.integers(2, 6), presets, sections,
       st.integers(1, 3), st.floats(0.001, 0.5))
def test_generated_scenarios_round_trip(name, anchor, seed, order, preset, f, k, tol):
    scn = Scenario(name, anchor, 1, 1, seed, order, 8, (0.5, 0.25, 0.125, 0.0625), preset, (f,),
                   tasks=[TaskSpec("mass", "mass", {"k": str(k), "tol": repr(tol)})])
    assert parse_scenario(scn.to_ini()) == scn


def test_randomised_tasks_need_a_seed():
    text = "[scenario]\nname = x\nanchor = y\nn = 2\nrank = 2\n[task.id]\nkind = identities\n"
    with pytest.raises(ScenarioError, match="seed"):
        parse_scenario(text)


@pytest.mark.parametrize("patch, where", [
    ("[metric]\npreset = diag(z1 +)\n", "metric"),
    ("[metric]\npreset = warped\n", "metric"),
    ("[section]\nf1 = zb1\n", "section:f1"),
    ("[task.x]\nkind = teleport\n", "task.x:kind"),
    ("[bogus]\nkey = 1\n", "bogus"),
])
def test_errors_name_their_location(patch, where):
    text = "[scenario]\nname = x\nanchor = y\nn = 1\nrank = 1\n" + patch
    with pytest.raises(ScenarioError) as info:
        parse_scenario(text, "f.ini")
    assert where in info.value.location


def test_lambda_schedule_parsing():
    assert parse_lambdas("2^-1, 2^-2, 2^-3") == (0.5, 0.25, 0.125)
    with pytest.raises(ScenarioError):
        parse_lambdas("0.5, 0.5, 0.25")
    with pytest.raises(ScenarioError):
        parse_lambdas("0.5, 0.25")


def test_malformed_metric_expression_exits_with_two(tmp_path, capsys):
    bad = SMALL.replace("grid = 4", "grid = 4\n[metric]\npreset = diag(exp(z1)))")
    rc = cli.main(["run", str(write(tmp_path, bad)), "--out-dir", str(tmp_path / "out")])
    assert rc == 2
    assert "parse error" in capsys.readouterr().err


def test_missing_file_exits_with_two(tmp_path):
    assert cli.main(["run", str(tmp_path / "absent.ini"), "--out-dir", str(tmp_path)]) == 2


def test_list_scenarios(capsys):
    assert cli.main(["list-scenarios"]) == 0
    out = capsys.readouterr().out
    for name in ("line-bundle-pl", "bezout-p2-deg6", "identities"):
        assert name in out


def test_run_writes_reports(tmp_path):
    out = tmp_path / "out"
    rc = cli.main(["run", str(write(tmp_path, SMALL)), "--out-dir", str(out)])
    assert rc == 0
    report = (out / "report.txt").read_text()
    assert "simple zero" in report and "overall: PASS" in report
    rows = list(csv.DictReader((out / "summary.csv").open()))
    assert rows[0].keys() == {"check_id", "paper_ref", "value", "target", "tol", "status"}
    assert any(r["check_id"] == "small/mass:standard" and r["status"] == "PASS" for r in rows)
    assert (out / "samples.csv").read_text().count("\n") > 3


def test_failed_check_exits_with_one(tmp_path):
    wrong = SMALL.replace("target = 1", "target = 2")
    assert cli.main(["run", str(write(tmp_path, wrong)), "--out-dir", str(tmp_path / "o")]) == 1


def test_line_bundle_scenario_passes_with_anchor(tmp_path):
    path = [p for p in cli.shipped_scenarios() if p.name == "line-bundle-pl.ini"][0]
    out = tmp_path / "pl"
    assert cli.main(["run", str(path), "--out-dir", str(out)]) == 0
    assert "classical Poincaré–Lelong" in (out / "report.txt").read_text()


def test_outputs_identical_across_worker_counts(tmp_path):
    text = SMALL.replace("n = 1", "n = 2").replace("rank = 1", "rank = 2").replace(
        "f1 = z1", "f1 = z1\nf2 = z2").replace("k = 1", "k = 2")
    path = write(tmp_path, text)
    outs = []
    for jobs in ("1", "2"):
        out = tmp_path / f"j{jobs}"
        cli.main(["run", str(path), "--out-dir", str(out), "--jobs", jobs])
        outs.append(((out / "summary.csv").read_bytes(), (out / "samples.csv").read_bytes()))
    assert outs[0] == outs[1]


def test_cli_overrides_reach_the_runner(tmp_path):
    scn = parse_scenario(SMALL)
    res = run_scenario(scn, RunOptions(grid=6, lambdas=(0.5, 0.25, 0.125, 0.0625)))
    lams = sorted({row[2] for row in res.samples})
    assert lams == [0.0625, 0.125, 0.25, 0.5]
