"""Pairings of the lambda-regularised currents with test forms, and their lambda -> 0 limits."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from math import factorial
from typing import Callable

import numpy as np

from .forms import ddc, lift
from .geometry import MetricField, chern_connection, chern_form
from .grassmann import GeneratorSet, Multivector, degree_project, divided_power, wedge
from .jets import Chart, Jet
from .positivity import top_density
from .quadrature import (
    INNER_CUTOFF,
    NodeValues,
    QuadratureFailure,
    UnsupportedGeometryError,
    gauss_legendre,
    sample_rule,
    spherical_rule,
)
from .section import SectionField

DEFAULT_LAMBDAS = tuple(2.0 ** -k for k in range(1, 7))
NODE_ORDER = 2


# -- test forms ----------------------------------------------------------------------

@dataclass(frozen=True)
class TestForm:
    """The bump (1 - |z-c|^2/R^2)^q on the ball |z - c| < R, zero outside."""

    center: tuple
    radius: float = 1.0
    q: int = 3

    def __post_init__(self):
        if self.q < 3:
            raise ValueError("bump exponent must be at least 3")

    @property
    def n(self) -> int:
        return len(self.center)

    def _x(self, points):
        c = np.asarray(self.center, dtype=complex)
        return (np.abs(np.asarray(points) - c[None, :]) ** 2).sum(axis=1) / self.radius ** 2

    def value(self, points) -> np.ndarray:
        x = self._x(points)
        return np.where(x < 1.0, np.clip(1.0 - x, 0.0, None) ** self.q, 0.0)

    def at_center(self) -> float:
        return 1.0

    def jet(self, chart: Chart) -> Jet:
        x = chart.const(0.0)
        for a, c in enumerate(self.center):
            u = chart.z(a) - c
            x = x + u * u.conj()
        return (1.0 - x * (1.0 / self.radius ** 2)) ** self.q

    def form(self, gens: GeneratorSet, chart: Chart, k: int) -> Multivector:
        """chi * beta^(n-k)/(n-k)!, beta the Euclidean Kaehler form."""
        return wedge(lift(gens, self.jet(chart)), euclidean_kaehler_power(gens, chart, self.n - k))

    def total_integral(self) -> float:
        """Integral of the bump over C^n."""
        n = self.n
        return np.pi ** n * self.radius ** (2 * n) * factorial(self.q) / factorial(self.q + n)

    def slice_integral(self) -> float:
        """Integral over a complex line through the centre (n = 2)."""
        return np.pi * self.radius ** 2 / (self.q + 1)


def euclidean_kaehler_power(gens, chart: Chart, r: int) -> Multivector:
    one = chart.const(1.0)
    beta = Multivector.from_terms(gens, {gens.dz(a) | gens.dzb(a): one * 0.5j for a in range(gens.n)})
    return divided_power(beta, r)


def plateau(dist, inner: float, outer: float) -> np.ndarray:
    """Smooth cutoff: 1 for dist <= inner, 0 for dist >= outer."""
    s = np.clip((outer - np.asarray(dist, dtype=float)) / (outer - inner), 0.0, 1.0)

    def h(x):
        return np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)

    a, b = h(s), h(1.0 - s)
    return a / (a + b)


# -- bundle models ----------------------------------------------------------------------

@dataclass
class BundleModel:
    """Metric and section as functions of a chart; the unit of work for pairings."""

    n: int
    m: int
    metric: Callable[[Chart], list]
    section: Callable[[Chart], list]
    label: str = ""

    def section_field(self, points, order: int = NODE_ORDER, check: bool = False) -> SectionField:
        chart = Chart(points, order)
        geom = chern_connection(MetricField.from_matrix(chart, self.metric(chart)), check=check)
        return SectionField(geom, self.section(chart), check=check)

    def chart(self, points, order=NODE_ORDER):
        return Chart(points, order)


def trivial_metric(m: int):
    def metric(chart):
        return [[chart.const(1.0 if i == j else 0.0) for j in range(m)] for i in range(m)]
    return metric


def fs_metric(degrees):
    """diag((1+|w|^2)^-d_j) in an affine chart."""
    def metric(chart):
        q = 1.0 + chart.norm2()
        m = len(degrees)
        return [[q.power(-float(degrees[i])) if i == j else chart.const(0.0) for j in range(m)]
                for i in range(m)]
    return metric


# -- pairing tasks ----------------------------------------------------------------------

@dataclass
class Region:
    """Ball around ``center`` with the singular set: the centre point, or also the
    coordinate hyperplanes through it."""

    center: tuple
    radius: float
    singular: str = "point"

    def rule(self, level: int, tail: bool):
        n = len(self.center)
        if self.singular not in ("point", "hyperplanes"):
            raise UnsupportedGeometryError(f"unsupported singular set {self.singular!r}")
        return spherical_rule(n, self.center, self.radius, level,
                              graded_angles=self.singular == "hyperplanes", tail=tail,
                              cutoff=INNER_CUTOFF)


@dataclass
class PairingTask:
    """<T, chi> for an integrand built pointwise.

    ``builder(points)`` returns ``(omega, logf2)``: the lambda-free density of
    the pairing against Lebesgue measure and log|f|^2 (ignored when
    ``regularised`` is false).
    """

    name: str
    builder: Callable
    region: Region
    regularised: bool = True
    k: int = 0
    level: int = 8
    lambdas: tuple = DEFAULT_LAMBDAS
    jobs: int = 1
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        lams = np.asarray(self.lambdas, dtype=float)
        if self.regularised and (np.any(lams <= 0) or np.any(np.diff(lams) >= 0)):
            raise ValueError("lambda schedule must be positive and strictly decreasing")

    def nodes(self, level: int) -> NodeValues:
        if level not in self._cache:
            rule = self.region.rule(level, tail=True)
            self._cache[level] = sample_rule(self.builder, rule, self.jobs,
                                             with_log=self.regularised)
        return self._cache[level]


@dataclass
class QuadResult:
    value: complex
    error: float
    nodes: int


def coarse_level(level: int) -> int:
    return max(2, (3 * level) // 4)


def integrate(task: PairingTask, lam: float | None = None) -> QuadResult:
    """Value at the task level; the error is the change from a rule at 3/4 of the level."""
    if task.regularised and not (lam is not None and lam > 0):
        raise ValueError("lambda must be positive")
    fine = task.nodes(task.level)
    coarse = task.nodes(coarse_level(task.level))
    vf = fine.total(lam)
    vc = coarse.total(lam)
    return QuadResult(vf, abs(vf - vc), fine.nodes)


@dataclass
class MassEstimate:
    limit: float
    error: float
    samples: list          # (lam, value, quad_err, nodes)
    ok: bool = True
    note: str = ""
    coeffs: np.ndarray | None = None


def extrapolate_samples(lams, values, quad_errs, degree: int = 3) -> MassEstimate:
    """Richardson limit lam -> 0 from samples on a decreasing schedule.

    The limit is the degree-``degree`` interpolant through the ``degree+1``
    smallest lambdas.  Larger lambdas only enter the error bar: it combines the
    shift to the next window of samples, the drop to one degree less, and the
    quadrature error.  Mass functions are analytic only in a disc whose radius
    shrinks with the vanishing order of f, so the small-lambda end is trusted.
    """
    lams = np.asarray(lams, dtype=float)
    vals = np.asarray(values, dtype=complex)
    if lams.size < 3:
        raise ValueError("need at least three lambda samples")
    order = np.argsort(lams)
    lams, vals = lams[order], vals[order]
    degree = min(degree, lams.size - 1)
    P = np.polynomial.polynomial

    def window(start, deg):
        sl = slice(start, start + deg + 1)
        return P.polyfit(lams[sl], vals[sl], deg)

    c = window(0, degree)
    spreads = [abs(c[0] - window(0, degree - 1)[0])] if degree >= 2 else []
    if lams.size > degree + 1:
        spreads.append(abs(c[0] - window(1, degree)[0]))
    used = min(lams.size, degree + 2)
    quad = float(np.max(np.asarray(quad_errs, dtype=float)[order][:used])) if len(quad_errs) else 0.0
    err = (max(spreads) if spreads else 0.0) + quad
    V = np.vander(lams[: degree + 1], degree + 1, increasing=True)
    cond = np.linalg.cond(V)
    ok = bool(np.isfinite(c[0]) and cond < 1e12)
    samples = [(float(l), complex(v), None, None) for l, v in zip(lams, vals)]
    note = "" if ok else f"ill-conditioned fit (cond {cond:.2e})"
    return MassEstimate(float(c[0].real), err, samples, ok, note, c)


def extrapolate_mass(task: PairingTask, degree: int = 3) -> MassEstimate:
    res = [integrate(task, lam) for lam in task.lambdas]
    est = extrapolate_samples(task.lambdas, [r.value for r in res], [r.error for r in res], degree)
    est.samples = [(lam, r.value, r.error, r.nodes) for lam, r in zip(task.lambdas, res)]
    return est


ROUNDOFF_FLOOR = 1e-12


def settles(errs, scale: float = 1.0) -> bool:
    """True when no estimate grows, ignoring changes below the round-off floor."""
    floor = ROUNDOFF_FLOOR * max(1.0, scale)
    return all(b <= max(a, floor) for a, b in zip(errs, errs[1:]))


def convergence_study(task: PairingTask, lam: float | None, levels=(4, 8),
                      raise_on_failure: bool = True):
    """Error estimates at increasing resolution and the finest value; errors must not grow."""
    errs = []
    for level in levels:
        fine = task.nodes(level).total(lam)
        coarse = task.nodes(coarse_level(level)).total(lam)
        errs.append(abs(fine - coarse))
    if raise_on_failure and not settles(errs, abs(fine)):
        raise QuadratureFailure(f"{task.name}: error estimates {errs} do not decrease with level")
    return errs, fine


def pairing_value(task: PairingTask) -> QuadResult:
    return integrate(task, None)


# -- integrand builders ------------------------------------------------------------------

def _test_form_at(S: SectionField, chi: TestForm, k: int) -> Multivector:
    chart = Chart(S.geom.metric.chart.points, 2)
    return chi.form(S.gens, chart, k)


def mass_builder(model: BundleModel, chi: TestForm, k: int, route: str = "standard", p: int = 1):
    """Density of lam |f|^(2 lam) aleph del|f|^2 ^ delbar|f|^2/|f|^4 ^ c(D_Q), degree (k,k),
    paired with chi beta^(n-k)/(n-k)!.  ``route='truncated'`` keeps only the terms
    j >= p-1 of the expansion of c_(k-1)(D_Q)."""
    def build(points):
        S = model.section_field(points)
        if route == "standard":
            dens = degree_project(S.mass_density(), k, k)
        else:
            dens = S.mprecis_density(k, p)
        chi_form = _test_form_at(S, chi, k)
        omega = top_density(wedge(dens.values(), chi_form.values()))
        return omega, S.log_norm2.value().real
    return build


def mass_task(model, chi: TestForm, k: int, *, route="standard", p=1, level=8,
              lambdas=DEFAULT_LAMBDAS, center=None, singular="point", jobs=1, name=None):
    c = chi.center if center is None else center
    return PairingTask(name or f"{model.label}:mass{k}:{route}", mass_builder(model, chi, k, route, p),
                       Region(c, chi.radius, singular), True, k, level, tuple(lambdas), jobs=jobs)


def mprecis_mass(model, chi, k, p, **kw) -> MassEstimate:
    return extrapolate_mass(mass_task(model, chi, k, route="truncated", p=p, **kw))


def _smooth_task(name, fn, chi, k, singular, level, jobs):
    return PairingTask(name, fn, Region(chi.center, chi.radius, singular), False, k, level, jobs=jobs)


def green_terms(model: BundleModel, chi: TestForm, k: int):
    """Builders for int W_(k-1) ^ dd^c chi_k, int c_k(D_E) ^ chi_k and int c_k(D_Q) ^ chi_k."""
    def w_term(points):
        S = model.section_field(points)
        W = degree_project(S.form_w(), k - 1, k - 1)
        dd = ddc(chi.form(S.gens, Chart(points, 4), k)).values()
        return (top_density(wedge(W.values(), dd)),)

    def ce_term(points):
        S = model.section_field(points)
        c = degree_project(chern_form(S.geom), k, k)
        return (top_density(wedge(c.values(), _test_form_at(S, chi, k).values())),)

    def cq_term(points):
        S = model.section_field(points)
        c = degree_project(S.cq, k, k)
        return (top_density(wedge(c.values(), _test_form_at(S, chi, k).values())),)

    return w_term, ce_term, cq_term


@dataclass
class PairingReport:
    terms: dict
    residual: float
    scale: float
    errors: dict = field(default_factory=dict)

    @property
    def relative(self) -> float:
        return abs(self.residual) / self.scale if self.scale > 0 else abs(self.residual)


def green_pairing(model: BundleModel, chi: TestForm, k: int, *, singular="point", level=8,
                  lambdas=DEFAULT_LAMBDAS, jobs=1) -> PairingReport:
    """int W_(k-1) dd^c chi - int c_k(D_E) chi + int c_k(D_Q) chi + <M_k, chi>."""
    w_term, ce_term, cq_term = green_terms(model, chi, k)
    vals, errs = {}, {}
    for name, fn in (("W_ddc_chi", w_term), ("cE_chi", ce_term), ("cQ_chi", cq_term)):
        r = pairing_value(_smooth_task(f"{model.label}:green:{name}", fn, chi, k, singular, level, jobs))
        vals[name], errs[name] = r.value.real, r.error
    mass = extrapolate_mass(mass_task(model, chi, k, level=level, lambdas=lambdas,
                                      singular=singular, jobs=jobs))
    vals["M_chi"], errs["M_chi"] = mass.limit, mass.error
    resid = vals["W_ddc_chi"] - vals["cE_chi"] + vals["cQ_chi"] + vals["M_chi"]
    scale = max(abs(v) for v in vals.values())
    return PairingReport(vals, resid, scale, errs)


def meo_pairing(model: BundleModel, chi: TestForm, p: int, components, *, level=8, jobs=1):
    """int w ^ dd^c chi_p - sum alpha_j int_{Z_j} chi_p + int gamma ^ chi_p.

    ``components`` lists (kind, multiplicity) with kind 'point' (the centre of
    chi) or 'hyperplane:a' for {z_a = c_a}.
    """
    n = model.n
    singular = "point"

    def w_term(points):
        S = model.section_field(points)
        w, _ = S.meo_forms(p)
        dd = ddc(chi.form(S.gens, Chart(points, 4), p)).values()
        return (top_density(wedge(w.values(), dd)),)

    def g_term(points):
        S = model.section_field(points)
        _, gam = S.meo_forms(p)
        return (top_density(wedge(gam.values(), _test_form_at(S, chi, p).values())),)

    zero_total = 0.0
    for kind, mult in components:
        if kind == "point":
            if p != n:
                raise UnsupportedGeometryError("point component needs p = n")
            zero_total += mult * chi.value(np.asarray([chi.center]))[0]
        elif kind.startswith("hyperplane:"):
            if p != 1 or n != 2:
                raise UnsupportedGeometryError("hyperplane components supported for n = 2, p = 1")
            singular = "hyperplanes"
            zero_total += mult * _hyperplane_integral(chi, int(kind.split(":")[1]), level)
        else:
            raise UnsupportedGeometryError(f"cannot parameterise component {kind!r}")
    vals, errs = {}, {}
    for name, fn in (("w_ddc_chi", w_term), ("gamma_chi", g_term)):
        r = pairing_value(_smooth_task(f"{model.label}:meo:{name}", fn, chi, p, singular, level, jobs))
        vals[name], errs[name] = r.value.real, r.error
    vals["zero_set"] = zero_total
    resid = vals["w_ddc_chi"] - zero_total + vals["gamma_chi"]
    scale = max(abs(v) for v in vals.values())
    return PairingReport(vals, resid, scale, errs)


def _hyperplane_integral(chi: TestForm, axis: int, level: int) -> float:
    """int over {z_axis = c_axis} of chi times the area form of the other coordinate."""
    other = 1 - axis
    rho, wr = gauss_legendre(4 * level, 0.0, chi.radius)
    th = 2 * np.pi * np.arange(2 * level) / (2 * level)
    pts = np.zeros((rho.size * th.size, 2), dtype=complex)
    pts[:, axis] = chi.center[axis]
    pts[:, other] = chi.center[other] + (rho[:, None] * np.exp(1j * th)[None, :]).ravel()
    w = (wr * rho)[:, None] * np.full(th.size, 2 * np.pi / th.size)[None, :]
    return float(np.dot(w.ravel(), chi.value(pts)))


def residue_task(model: BundleModel, chi: TestForm, level=8, lambdas=DEFAULT_LAMBDAS):
    """Line bundle on C: lam-free part of dbar|f|^(2 lam) ^ (1/f) ^ chi dz, divided by lam."""
    if model.n != 1 or model.m != 1:
        raise UnsupportedGeometryError("residue pairing implemented for n = m = 1")

    def build(points):
        S = model.section_field(points, order=2)
        # dbar |f|^(2 lam) = lam |f|^(2 lam) dbar log|f|^2, and dzb ^ dz = 2i dx dy
        dlog = S.log_norm2.diff(1).value()
        omega = dlog * S.sigma_row[0].value() * chi.value(points) * 2j
        return omega, S.log_norm2.value().real

    return PairingTask(f"{model.label}:residue", build, Region(chi.center, chi.radius), True, 1,
                       level, tuple(lambdas))


def write_samples_csv(path, rows):
    """rows: (scenario, k, lam, value, quad_err, nodes)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scenario", "k", "lambda", "value_re", "value_im", "quad_err", "nodes"])
        for scen, k, lam, val, err, nodes in rows:
            val = complex(val)
            w.writerow([scen, k, _fmt(lam), _fmt(val.real), _fmt(val.imag), _fmt(err), nodes])


def _fmt(x) -> str:
    if x is None:
        return ""
    return f"{float(x):.12e}"
