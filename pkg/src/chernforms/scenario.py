"""Scenario files: parsing, validation, emission and execution.

A scenario is an INI file with a ``[scenario]`` header, optional ``[metric]``,
``[section]`` and ``[projective]`` sections, and one ``[task.NAME]`` section per
check group.  Expressions use the grammar in :mod:`chernforms.expr`.
"""

from __future__ import annotations

import configparser
import io
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import expr
from .currents import (
    DEFAULT_LAMBDAS,
    BundleModel,
    TestForm,
    convergence_study,
    extrapolate_mass,
    extrapolate_samples,
    green_pairing,
    integrate,
    mass_task,
    meo_pairing,
    residue_task,
    settles,
)
from .forms import ALEPH
from .geometry import MetricField, chern_connection, chern_form
from .grassmann import degree_project
from .identities import literal_sign_residuals, random_section_field, run_suite
from .jets import Chart
from .positivity import positive_form_test, positivity_check
from .projective import Polynomial, ProjectiveScenario, bezout_run, fs_bundle, integrate_top_power

TASK_KINDS = ("identities", "fs-anchors", "mass", "green", "meo", "residue", "bezout",
              "positivity", "convergence")
_PRESET = re.compile(r"^\s*(trivial|fs|diag)\s*(?:\((.*)\))?\s*$", re.S)


class ScenarioError(ValueError):
    """Invalid scenario; ``location`` names the file, section and key."""

    def __init__(self, message: str, location: str = ""):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


@dataclass
class TaskSpec:
    name: str
    kind: str
    params: dict = field(default_factory=dict)

    def get(self, key, default=None):
        return self.params.get(key, default)


@dataclass
class Scenario:
    name: str
    anchor: str
    n: int
    rank: int
    seed: int | None = None
    jet_order: int = 4
    grid: int = 8
    lambdas: tuple = DEFAULT_LAMBDAS
    metric: str = "trivial"
    section: tuple = ()
    degrees: tuple = ()
    zeros: str = ""
    tasks: list = field(default_factory=list)
    source: str = "<scenario>"

    # -- models -----------------------------------------------------------------
    def metric_function(self):
        m = self.rank
        kind, args = _split_preset(self.metric, self.source)
        if kind == "trivial":
            def metric(chart):
                return [[chart.const(1.0 if i == j else 0.0) for j in range(m)] for i in range(m)]
            return metric
        if kind == "fs":
            degs = [float(x) for x in args]
            if len(degs) != m:
                raise ScenarioError(f"fs(...) needs {m} degrees", f"{self.source}:metric")

            def metric(chart):
                q = 1.0 + chart.norm2()
                return [[q.power(-degs[i]) if i == j else chart.const(0.0) for j in range(m)]
                        for i in range(m)]
            return metric
        entries = [expr.parse(a, self.n) for a in args]
        if len(entries) != m:
            raise ScenarioError(f"diag(...) needs {m} entries", f"{self.source}:metric")

        def metric(chart):
            z = [chart.z(a) for a in range(self.n)]
            zb = [chart.zb(a) for a in range(self.n)]
            out = [[chart.const(0.0) for _ in range(m)] for _ in range(m)]
            for i, e in enumerate(entries):
                out[i][i] = _as_jet(e.evaluate(z, zb), chart)
            return out
        return metric

    def section_function(self):
        comps = [expr.parse(s, self.n) for s in self.section]

        def section(chart):
            z = [chart.z(a) for a in range(self.n)]
            return [_as_jet(c.evaluate(z), chart) for c in comps]
        return section

    def model(self) -> BundleModel:
        return BundleModel(self.n, self.rank, self.metric_function(), self.section_function(), self.name)

    def projective(self) -> ProjectiveScenario:
        nv = self.n
        vars_ = [Polynomial.variable(nv, a) for a in range(nv)]
        polys = [expr.parse(s, nv).evaluate(vars_) for s in self.section]
        polys = [p if isinstance(p, Polynomial) else Polynomial.constant(nv, p) for p in polys]
        return ProjectiveScenario(nv, tuple(self.degrees), polys, parse_zeros(self.zeros, self.source),
                                  self.name)

    # -- emission -----------------------------------------------------------------
    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        head = {"name": self.name, "anchor": self.anchor, "n": str(self.n), "rank": str(self.rank),
                "jet_order": str(self.jet_order), "grid": str(self.grid),
                "lambdas": ", ".join(repr(float(x)) for x in self.lambdas)}
        if self.seed is not None:
            head["seed"] = str(self.seed)
        cp["scenario"] = head
        cp["metric"] = {"preset": self.metric}
        if self.section:
            cp["section"] = {f"f{j + 1}": s for j, s in enumerate(self.section)}
        if self.degrees:
            cp["projective"] = {"degrees": ", ".join(str(d) for d in self.degrees),
                                "zeros": self.zeros}
        for t in self.tasks:
            cp[f"task.{t.name}"] = {"kind": t.kind, **t.params}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


def _as_jet(value, chart: Chart):
    return value if hasattr(value, "coeffs") else chart.const(complex(value))


def _split_preset(text: str, source: str):
    m = _PRESET.match(text)
    if not m:
        raise ScenarioError(f"unknown metric preset {text!r}", f"{source}:metric:preset")
    kind, inner = m.group(1), m.group(2)
    if kind == "trivial":
        if inner:
            raise ScenarioError("trivial takes no arguments", f"{source}:metric:preset")
        return kind, []
    if inner is None or not inner.strip():
        raise ScenarioError(f"{kind}(...) needs arguments", f"{source}:metric:preset")
    return kind, _split_args(inner)


def _split_args(text: str) -> list:
    """Split on top-level commas."""
    out, depth, cur = [], 0, []
    for ch in text:
        if ch == "," and depth == 0:
            out.append("".join(cur).strip())
            cur = []
            continue
        depth += ch == "("
        depth -= ch == ")"
        cur.append(ch)
    out.append("".join(cur).strip())
    return out


def parse_zeros(text: str, source: str = "") -> list:
    """Homogeneous points 'a : b : c; ...' with expression coordinates."""
    pts = []
    for chunk in filter(None, (c.strip() for c in text.split(";"))):
        coords = []
        for c in chunk.split(":"):
            e = expr.parse(c, 0)
            coords.append(complex(e.evaluate([])))
        pts.append(tuple(coords))
    return pts


def _int(cp, sec, key, source, default=None):
    if not cp.has_option(sec, key):
        if default is None:
            raise ScenarioError("missing required key", f"{source}:{sec}:{key}")
        return default
    raw = cp.get(sec, key)
    try:
        return int(raw)
    except ValueError:
        raise ScenarioError(f"expected an integer, got {raw!r}", f"{source}:{sec}:{key}") from None


def parse_lambdas(text: str, where: str = "") -> tuple:
    try:
        lams = tuple(float(expr.parse(x, 0).evaluate([]).real) for x in text.split(","))
    except (expr.ExpressionError, TypeError, AttributeError) as exc:
        raise ScenarioError(f"bad lambda schedule: {exc}", where) from None
    if len(lams) < 3 or any(x <= 0 for x in lams) or any(b >= a for a, b in zip(lams, lams[1:])):
        raise ScenarioError("lambda schedule must have >= 3 positive, strictly decreasing values",
                            where)
    return lams


def parse_scenario(text: str, source: str = "<scenario>") -> Scenario:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ScenarioError(str(exc).splitlines()[0], source) from None
    if not cp.has_section("scenario"):
        raise ScenarioError("missing [scenario] section", source)
    sec = "scenario"
    for key in ("name", "anchor"):
        if not cp.has_option(sec, key):
            raise ScenarioError("missing required key", f"{source}:{sec}:{key}")
    n = _int(cp, sec, "n", source)
    rank = _int(cp, sec, "rank", source)
    if n < 1 or rank < 1:
        raise ScenarioError("n and rank must be positive", f"{source}:{sec}")
    seed = _int(cp, sec, "seed", source, -1)
    lams = DEFAULT_LAMBDAS
    if cp.has_option(sec, "lambdas"):
        lams = parse_lambdas(cp.get(sec, "lambdas"), f"{source}:{sec}:lambdas")
    scn = Scenario(cp.get(sec, "name").strip(), cp.get(sec, "anchor").strip(), n, rank,
                   None if seed < 0 else seed, _int(cp, sec, "jet_order", source, 4),
                   _int(cp, sec, "grid", source, 8), lams, source=source)
    if cp.has_section("metric"):
        scn.metric = cp.get("metric", "preset", fallback="trivial").strip()
    kind, args = _split_preset(scn.metric, source)
    if kind == "diag":
        for a in args:
            _expr_or_error(a, n, f"{source}:metric:preset")
    if kind == "fs":
        for a in args:
            try:
                if float(a) < 1:
                    raise ValueError
            except ValueError:
                raise ScenarioError(f"fs degrees must be numbers >= 1, got {a!r}",
                                    f"{source}:metric:preset") from None
    if cp.has_section("section"):
        keys = sorted(cp.options("section"), key=lambda k: int(k[1:]) if k[1:].isdigit() else 0)
        if keys != [f"f{j + 1}" for j in range(len(keys))]:
            raise ScenarioError("section entries must be f1, f2, ...", f"{source}:section")
        scn.section = tuple(cp.get("section", k).strip() for k in keys)
        for k, s in zip(keys, scn.section):
            e = _expr_or_error(s, n, f"{source}:section:{k}")
            if not e.holomorphic:
                raise ScenarioError("section entries must be holomorphic", f"{source}:section:{k}")
    if cp.has_section("projective"):
        degs = cp.get("projective", "degrees", fallback="")
        try:
            scn.degrees = tuple(int(x) for x in degs.split(","))
        except ValueError:
            raise ScenarioError("degrees must be integers", f"{source}:projective:degrees") from None
        scn.zeros = cp.get("projective", "zeros", fallback="").strip()
        try:
            parse_zeros(scn.zeros, source)
        except expr.ExpressionError as exc:
            raise ScenarioError(str(exc), f"{source}:projective:zeros") from None
    for name in cp.sections():
        if not name.startswith("task."):
            if name not in ("scenario", "metric", "section", "projective"):
                raise ScenarioError("unknown section", f"{source}:{name}")
            continue
        params = dict(cp.items(name))
        kind = params.pop("kind", None)
        if kind not in TASK_KINDS:
            raise ScenarioError(f"unknown task kind {kind!r}", f"{source}:{name}:kind")
        scn.tasks.append(TaskSpec(name[len("task."):], kind, params))
    _validate(scn)
    return scn


def _expr_or_error(text, n, where):
    try:
        return expr.parse(text, n)
    except expr.ExpressionError as exc:
        raise ScenarioError(str(exc), where) from None


def _validate(scn: Scenario):
    needs_section = {"mass", "green", "meo", "residue", "bezout", "convergence"}
    for t in scn.tasks:
        where = f"{scn.source}:task.{t.name}"
        if t.kind in ("identities", "positivity") and scn.seed is None:
            raise ScenarioError("randomised tasks need a seed in [scenario]", where)
        if t.kind in needs_section and len(scn.section) != scn.rank:
            raise ScenarioError(f"need {scn.rank} section entries", where)
        if t.kind == "bezout" and len(scn.degrees) != scn.rank:
            raise ScenarioError("bezout needs [projective] degrees, one per entry", where)
        for key, val in t.params.items():
            if key in ("k", "p", "points", "trials", "level"):
                if not val.strip().lstrip("-").isdigit():
                    raise ScenarioError(f"expected an integer, got {val!r}", f"{where}:{key}")
            if key in ("tol", "target", "radius"):
                _expr_or_error(val, 0, f"{where}:{key}")


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc.strerror}", str(path)) from None
    return parse_scenario(text, str(path))


# -- execution ----------------------------------------------------------------------

@dataclass
class Check:
    check_id: str
    anchor: str
    value: float
    target: float
    tol: float
    passed: bool
    informational: bool = False

    @property
    def status(self) -> str:
        return "INFO" if self.informational else ("PASS" if self.passed else "FAIL")


@dataclass
class RunOptions:
    seed: int | None = None
    jet_order: int | None = None
    grid: int | None = None
    lambdas: tuple | None = None
    jobs: int = 1


@dataclass
class RunResult:
    scenario: Scenario
    checks: list
    samples: list

    @property
    def passed(self) -> bool:
        return all(c.passed or c.informational for c in self.checks)


def _num(text, default):
    if text is None:
        return default
    v = expr.parse(str(text), 0).evaluate([])
    return complex(v).real if not isinstance(v, (int, float)) else float(v)


class _Runner:
    def __init__(self, scn: Scenario, opts: RunOptions):
        self.scn = scn
        self.opts = opts
        self.seed = opts.seed if opts.seed is not None else scn.seed
        self.order = opts.jet_order or scn.jet_order
        self.level = opts.grid or scn.grid
        self.lambdas = opts.lambdas or scn.lambdas
        self.checks, self.samples = [], []

    def add(self, cid, value, target, tol, passed, info=False, anchor=None):
        self.checks.append(Check(f"{self.scn.name}/{cid}", anchor or self.scn.anchor, float(value),
                                 float(target), float(tol), bool(passed), info))

    def chi(self, t: TaskSpec):
        r = _num(t.get("radius"), 1.0)
        return TestForm(tuple(0.0 for _ in range(self.scn.n)), r, 3)

    def run(self):
        for t in self.scn.tasks:
            getattr(self, "task_" + t.kind.replace("-", "_"))(t)
        return RunResult(self.scn, self.checks, self.samples)

    # each task appends its checks
    def task_identities(self, t):
        ranks = tuple(int(x) for x in t.get("ranks", str(self.scn.rank)).split(","))
        points = int(t.get("points", "100"))
        tol = _num(t.get("tol"), 1e-9)
        ltol = _num(t.get("lambda_tol"), 1e-12)
        worst = run_suite(self.seed, self.scn.n, ranks, points, self.order)
        for key, r in worst.items():
            lim = ltol if key in ("residue", "principal", "quotient") else tol
            self.add(f"{t.name}:{key}", r, 0.0, lim, r < lim)
        rng = np.random.default_rng(self.seed)
        for m in ranks:
            if m < 2:
                continue
            S = random_section_field(rng, self.scn.n, m, 10, self.order)
            for key, r in literal_sign_residuals(S).items():
                self.add(f"{t.name}:m{m}:{key}", r, 0.0, tol, False, info=True)

    def task_fs_anchors(self, t):
        tol = _num(t.get("tol"), 1e-10)
        rng = np.random.default_rng(self.seed if self.seed is not None else 0)
        shape = (int(t.get("points", "20")), self.scn.n)
        pts = rng.normal(size=shape) + 1j * rng.normal(size=shape)
        degs = tuple(int(x) for x in t.get("degrees", "1").split(","))
        res = fs_bundle(self.scn.n, degs).chern_residual(pts, max(self.order - 1, 3))
        self.add(f"{t.name}:chern_product", res, 0.0, tol, res < tol)
        itol = _num(t.get("integral_tol"), 1e-4 if self.scn.n == 1 else 1e-3)
        parts = integrate_top_power(self.scn.n, self.level)
        total = sum(parts)
        self.add(f"{t.name}:top_power_integral", total, 1.0, itol, abs(total - 1) < itol)

    def _mass(self, t, k, route, p):
        task = mass_task(self.scn.model(), self.chi(t), k, route=route, p=p, level=self.level,
                         lambdas=self.lambdas, jobs=self.opts.jobs,
                         name=f"{self.scn.name}:{t.name}:{route}")
        est = extrapolate_mass(task)
        for lam, val, err, nodes in est.samples:
            self.samples.append((f"{self.scn.name}/{t.name}/{route}", k, lam, val, err, nodes))
        return est

    def task_mass(self, t):
        k = int(t.get("k", str(self.scn.n)))
        p = int(t.get("p", str(min(self.scn.rank, self.scn.n))))
        target = _num(t.get("target"), 0.0)
        tol = _num(t.get("tol"), 0.01)
        routes = {"both": ("standard", "truncated")}.get(t.get("route", "standard"),
                                                          (t.get("route", "standard"),))
        ests = {}
        for route in routes:
            est = self._mass(t, k, route, p)
            ests[route] = est
            cid = f"{t.name}:{route}"
            if target == 0:
                ok = abs(est.limit) <= est.error
                self.add(cid, est.limit, 0.0, est.error, ok and est.ok)
            else:
                ok = abs(est.limit - target) <= tol * abs(target)
                self.add(cid, est.limit, target, tol * abs(target), ok and est.ok)
            self.add(f"{cid}:error_bar", est.error, 0.0, 0.0, True, info=True)
            if k == p:
                self.add(f"{cid}:nonnegative", est.limit, 0.0, est.error, est.limit >= -est.error,
                         anchor="positivity of the top mass")
        if len(ests) == 2:
            a, b = ests["standard"], ests["truncated"]
            gap = abs(a.limit - b.limit)
            bar = a.error + b.error
            self.add(f"{t.name}:route_agreement", gap, 0.0, bar, gap <= bar,
                     anchor="truncated mass formula")

    def task_green(self, t):
        k = int(t.get("k", str(self.scn.rank)))
        tol = _num(t.get("tol"), 0.02)
        rep = green_pairing(self.scn.model(), self.chi(t), k, level=self.level,
                            lambdas=self.lambdas, jobs=self.opts.jobs)
        for key, v in rep.terms.items():
            self.add(f"{t.name}:{key}", v, 0.0, 0.0, True, info=True)
        self.add(f"{t.name}:relative_residual", rep.relative, 0.0, tol, rep.relative < tol)

    def task_meo(self, t):
        p = int(t.get("p", str(self.scn.rank)))
        tol = _num(t.get("tol"), 0.02)
        comps = []
        for c in t.get("components", "point:1").split(","):
            parts = [x.strip() for x in c.split(":")]
            comps.append((":".join(parts[:-1]), int(parts[-1])))
        rep = meo_pairing(self.scn.model(), self.chi(t), p, comps, level=self.level,
                          jobs=self.opts.jobs)
        for key, v in rep.terms.items():
            self.add(f"{t.name}:{key}", v, 0.0, 0.0, True, info=True)
        self.add(f"{t.name}:relative_residual", rep.relative, 0.0, tol, rep.relative < tol)

    def task_residue(self, t):
        tol = _num(t.get("tol"), 0.01)
        task = residue_task(self.scn.model(), self.chi(t), level=self.level, lambdas=self.lambdas)
        lams = task.lambdas
        res = [integrate(task, lam) for lam in lams]
        # the pairing is 2 pi i chi(0); extrapolate the imaginary part as a real sequence
        est = extrapolate_samples(lams, [r.value.imag for r in res], [r.error for r in res])
        target = 2 * math.pi
        real = extrapolate_samples(lams, [r.value.real for r in res], [r.error for r in res])
        self.add(f"{t.name}:real_part", real.limit, 0.0, tol * target, abs(real.limit) < tol * target)
        self.add(f"{t.name}:imaginary_part", est.limit, target, tol * target,
                 abs(est.limit - target) < tol * target)

    def task_bezout(self, t):
        tol = _num(t.get("tol"), 0.02)
        rep = bezout_run(self.scn.projective(), level=self.level, lambdas=self.lambdas,
                         jobs=self.opts.jobs)
        for z, i, e in rep.local:
            for lam, val, err, nodes in e.samples:
                self.samples.append((f"{self.scn.name}/{t.name}/chart{i}", self.scn.rank, lam, val,
                                     err, nodes))
        for key in ("total", "affine", "infinity"):
            if t.get(key) is None:
                continue
            want = _num(t.get(key), 0.0)
            val = getattr(rep, key)
            bar = tol * max(abs(want), rep.bound)
            self.add(f"{t.name}:{key}_mass", val, want, bar, abs(val - want) <= bar)
        err = rep.total_error
        self.add(f"{t.name}:bound_slack", rep.slack, 0.0, err, rep.slack >= -err,
                 anchor="Bezout inequality")

    def task_positivity(self, t):
        rng = np.random.default_rng(self.seed)
        mode = t.get("mode", "bott_chern")
        n = self.scn.n
        pts = rng.normal(size=(int(t.get("points", "50")), n)) + 1j * rng.normal(
            size=(int(t.get("points", "50")), n))
        chart = Chart(pts, 3)
        geom = chern_connection(MetricField.from_matrix(chart, self.scn.metric_function()(chart)))
        mat = [[geom.curvature[j][k] * ALEPH for k in range(self.scn.rank)]
               for j in range(self.scn.rank)]
        verdict = positivity_check(mat, mode, geom.metric.values())
        self.add(f"{t.name}:{mode}_min_eigenvalue", verdict.min_eigenvalue, 0.0, 1e-10,
                 verdict.positive)
        c = chern_form(geom)
        trials = int(t.get("trials", "200"))
        for k in range(1, min(n, self.scn.rank) + 1):
            ok, low, im = positive_form_test(degree_project(c, k, k).truncate(0), trials=trials,
                                             seed=self.seed)
            self.add(f"{t.name}:c{k}_positive_form", low, 0.0, 1e-10, ok)

    def task_convergence(self, t):
        k = int(t.get("k", str(self.scn.n)))
        lam = _num(t.get("lambda"), self.lambdas[-1])
        levels = tuple(int(x) for x in t.get("levels", "8, 16").split(","))
        task = mass_task(self.scn.model(), self.chi(t), k, lambdas=self.lambdas, jobs=self.opts.jobs)
        errs, value = convergence_study(task, lam, levels, raise_on_failure=False)
        ok = settles(errs, abs(value))
        for lv, e in zip(levels, errs):
            self.add(f"{t.name}:level{lv}_error", e, 0.0, 0.0, True, info=True)
        self.add(f"{t.name}:monotone", float(ok), 1.0, 0.0, ok)


def run_scenario(scn: Scenario, opts: RunOptions | None = None) -> RunResult:
    return _Runner(scn, opts or RunOptions()).run()
