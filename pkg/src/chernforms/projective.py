"""Projective space: Fubini-Study bundles, integration over the standard charts, Bezout counts.

A point of chart ``i`` has homogeneous coordinates with ``z_i = 1``; the chart
coordinates are the remaining ``z_j`` in increasing order of ``j``.  The
Fubini-Study norm of a section of O(d) in that chart is ``|h|^2 / (1+|w|^2)^d``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from math import factorial, prod

import numpy as np

from .currents import DEFAULT_LAMBDAS, PairingTask, Region, extrapolate_mass, plateau
from .forms import ALEPH, del_, delbar, lift
from .geometry import MetricField, chern_connection, chern_form
from .grassmann import GeneratorSet, Multivector, degree_project, wedge
from .jets import Chart
from .positivity import top_density
from .quadrature import UnsupportedGeometryError, global_rule, sample_rule
from .section import SectionField, ZeroSetError

CHART_SPAN = 9.0


# -- polynomials -----------------------------------------------------------------------

class Polynomial:
    """Sparse polynomial in ``nvars`` variables: {exponent tuple: coefficient}."""

    def __init__(self, nvars: int, terms=None):
        self.nvars = nvars
        self.terms = {tuple(e): complex(c) for e, c in (terms or {}).items() if c != 0}

    @classmethod
    def constant(cls, nvars, c):
        return cls(nvars, {(0,) * nvars: c})

    @classmethod
    def variable(cls, nvars, a):
        e = [0] * nvars
        e[a] = 1
        return cls(nvars, {tuple(e): 1.0})

    @property
    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    def _coerce(self, other):
        if isinstance(other, Polynomial):
            if other.nvars != self.nvars:
                raise ValueError("polynomials in different numbers of variables")
            return other
        return Polynomial.constant(self.nvars, other)

    def __add__(self, other):
        other = self._coerce(other)
        out = dict(self.terms)
        for e, c in other.terms.items():
            out[e] = out.get(e, 0) + c
        return Polynomial(self.nvars, out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.nvars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        out = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0) + c1 * c2
        return Polynomial(self.nvars, out)

    __rmul__ = __mul__

    def __truediv__(self, c):
        if isinstance(c, Polynomial):
            raise TypeError("division by a polynomial is not a polynomial")
        return self * (1.0 / c)

    def __pow__(self, k):
        if int(k) != k or k < 0:
            raise ValueError("polynomial powers must be nonnegative integers")
        out = Polynomial.constant(self.nvars, 1.0)
        for _ in range(int(k)):
            out = out * self
        return out

    def __eq__(self, other):
        return isinstance(other, Polynomial) and self.nvars == other.nvars and self.terms == other.terms

    def __repr__(self):
        return f"Polynomial({self.nvars}, {self.terms})"

    def homogenize(self, d: int) -> "Polynomial":
        """z0^d F(z'/z0) in nvars+1 variables, z0 first."""
        if self.degree > d:
            raise ValueError(f"polynomial of degree {self.degree} exceeds declared degree {d}")
        return Polynomial(self.nvars + 1, {(d - sum(e),) + e: c for e, c in self.terms.items()})

    def evaluate(self, values):
        """Evaluate on a list of Jets or arrays (one per variable)."""
        acc = None
        for e, c in self.terms.items():
            t = None
            for v, k in zip(values, e):
                if k:
                    p = v ** k
                    t = p if t is None else t * p
            t = c if t is None else t * c
            acc = t if acc is None else acc + t
        if acc is None:
            acc = 0.0
        if not hasattr(acc, "value") and hasattr(values[0], "value"):
            acc = values[0] * 0.0 + acc
        return acc


def chart_coordinates(n: int, chart: int, ones, coords):
    """Homogeneous coordinates [z_0..z_n] of chart points (coords is a list of n entries)."""
    rest = iter(coords)
    return [ones if j == chart else next(rest) for j in range(n + 1)]


def to_chart(z: np.ndarray, chart: int):
    """Chart coordinates of homogeneous points z (B, n+1); NaN where z_chart = 0."""
    zi = z[:, chart]
    safe = np.abs(zi) > 1e-300
    w = np.delete(z, chart, axis=1) / np.where(safe, zi, 1.0)[:, None]
    w[~safe] = np.nan
    return w


def homogeneous(points: np.ndarray, chart: int) -> np.ndarray:
    pts = np.atleast_2d(points)
    return np.insert(pts, chart, 1.0, axis=1)


# -- Fubini-Study bundles ---------------------------------------------------------------

@dataclass(frozen=True)
class FSBundle:
    """O(d_1) + ... + O(d_m) over P^n with the Fubini-Study metric."""

    n: int
    degrees: tuple

    def __post_init__(self):
        if any(d < 1 for d in self.degrees):
            raise ValueError("degrees must be at least 1")

    @property
    def m(self) -> int:
        return len(self.degrees)

    def metric(self, chart: Chart) -> MetricField:
        q = 1.0 + chart.norm2()
        return MetricField.diagonal(chart, [q.power(-float(d)) for d in self.degrees])

    def gram(self, chart: Chart) -> list:
        return [list(r) for r in self.metric(chart).gram]

    def kaehler_form(self, gens: GeneratorSet, chart: Chart) -> Multivector:
        """omega = aleph del delbar log(1 + |w|^2)."""
        q = lift(gens, (1.0 + chart.norm2()).log())
        return del_(delbar(q)) * ALEPH

    def chern_residual(self, points, order: int = 3) -> float:
        """Largest coefficient of c(D_E) - prod(1 + d_j omega) at the given chart points."""
        chart = Chart(points, order)
        geom = chern_connection(self.metric(chart))
        c = chern_form(geom)
        om = self.kaehler_form(geom.gens, chart)
        expected = geom.one()
        for d in self.degrees:
            expected = wedge(expected, geom.one() + om * float(d))
        return (c - expected).max_abs()


def fs_bundle(n: int, degrees) -> FSBundle:
    return FSBundle(n, tuple(int(d) for d in degrees))


def chart_partition(points: np.ndarray) -> np.ndarray:
    """Weight |z_i|^2/|z|^2 of chart i, written in that chart."""
    return 1.0 / (1.0 + (np.abs(points) ** 2).sum(axis=1))


def integrate_top_power(n: int, level: int = 8, span: float = CHART_SPAN):
    """Integral of omega^n over P^n, one entry per standard chart."""
    bundle = fs_bundle(n, (1,))
    rule = global_rule(n, level, span)

    def density(points):
        chart = Chart(points, 2)
        gens = GeneratorSet(n, 1)
        om = bundle.kaehler_form(gens, chart)
        top = om if n == 1 else wedge(om, om) if n == 2 else None
        if top is None:
            raise UnsupportedGeometryError("chart integration implemented for n <= 2")
        return (top_density(top.truncate(0)) * chart_partition(points),)

    parts = []
    for _ in range(n + 1):
        vals = sample_rule(density, rule, with_log=False)
        parts.append(vals.total(None).real)
    return parts


# -- Bezout scenarios ---------------------------------------------------------------------

@dataclass
class ProjectiveScenario:
    """Affine polynomial system of declared degrees, with its zeros in P^n listed explicitly.

    ``zeros`` holds homogeneous coordinates [z_0 : ... : z_n]; z_0 = 0 marks a
    zero on the hyperplane at infinity.
    """

    n: int
    degrees: tuple
    polynomials: list
    zeros: list
    label: str = "projective"

    def __post_init__(self):
        if len(self.degrees) != len(self.polynomials):
            raise ValueError("one declared degree per polynomial")
        self.homogeneous = [F.homogenize(d) for F, d in zip(self.polynomials, self.degrees)]

    @property
    def m(self) -> int:
        return len(self.degrees)

    @property
    def bundle(self) -> FSBundle:
        return fs_bundle(self.n, self.degrees)

    def section(self, chart_index: int, chart: Chart) -> list:
        z = chart_coordinates(self.n, chart_index, chart.const(1.0),
                              [chart.z(a) for a in range(self.n)])
        return [h.evaluate(z) for h in self.homogeneous]

    def section_field(self, chart_index: int, points) -> SectionField:
        chart = Chart(points, 2)
        geom = chern_connection(self.bundle.metric(chart), check=False)
        return SectionField(geom, self.section(chart_index, chart), check=False)

    def check_zeros(self, tol: float = 1e-9):
        for zeta in self.zeros:
            z = np.asarray(zeta, dtype=complex)
            z = z / np.abs(z).max()
            vals = [abs(h.evaluate(list(z))) for h in self.homogeneous]
            if max(vals) > tol:
                raise ZeroSetError(f"listed point {tuple(zeta)} is not a common zero")


@dataclass
class BezoutReport:
    total: float
    total_error: float
    affine: float
    affine_error: float
    infinity: float
    infinity_error: float
    bound: float
    local: list = field(default_factory=list)     # (zero, chart, MassEstimate)
    remainder: list = field(default_factory=list)  # (chart, MassEstimate)

    @property
    def slack(self) -> float:
        return self.bound - self.total


def _local_geometry(zeros, n):
    """Best chart and chart coordinates of each zero, plus cutoff radii."""
    homog = [np.asarray(z, dtype=complex) for z in zeros]
    placed = []
    for z in homog:
        i = int(np.argmax(np.abs(z)))
        placed.append((i, to_chart(z[None, :], i)[0]))
    outer = 0.5
    for a, (i, w) in enumerate(placed):
        for b, zb in enumerate(homog):
            if a == b:
                continue
            wb = to_chart(zb[None, :], i)[0]
            if np.all(np.isfinite(wb)):
                outer = min(outer, 0.4 * float(np.linalg.norm(wb - w)))
    return placed, outer


def bezout_run(scn: ProjectiveScenario, *, level: int = 8, lambdas=DEFAULT_LAMBDAS,
               jobs: int = 1) -> BezoutReport:
    """Mass of the top current on P^n, split into affine zeros and the hyperplane at infinity."""
    if scn.m != scn.n:
        raise UnsupportedGeometryError("mass splitting is implemented for complete intersections m = n")
    if scn.n > 2:
        raise UnsupportedGeometryError("chart quadrature implemented for n <= 2")
    scn.check_zeros()
    n, k = scn.n, scn.m
    placed, outer = _local_geometry(scn.zeros, n)
    inner = 0.5 * outer

    def cutoffs(z):
        """Plateau weights (B, #zeros) of homogeneous points."""
        out = np.zeros((z.shape[0], len(placed)))
        for j, (i, w) in enumerate(placed):
            wz = to_chart(z, i)
            dist = np.linalg.norm(np.nan_to_num(wz - w[None, :], nan=1e6), axis=1)
            out[:, j] = plateau(dist, inner, outer)
        return out

    def density(chart_index, points):
        S = scn.section_field(chart_index, points)
        om = top_density(degree_project(S.mass_density(), k, k).values())
        return om, S.log_norm2.value().real

    local = []
    for j, (i, w) in enumerate(placed):
        def build(points, i=i, w=w):
            om, lf = density(i, points)
            psi = plateau(np.linalg.norm(points - w[None, :], axis=1), inner, outer)
            return om * psi, lf
        task = PairingTask(f"{scn.label}:zero{j}", build, Region(tuple(w), outer), True, k,
                           level, tuple(lambdas), jobs)
        local.append((tuple(scn.zeros[j]), i, extrapolate_mass(task)))

    remainder = []
    for i in range(n + 1):
        def build(points, i=i):
            psi0 = 1.0 - cutoffs(homogeneous(points, i)).sum(axis=1)
            keep = psi0 > 0
            om = np.zeros(points.shape[0], dtype=complex)
            lf = np.zeros(points.shape[0])
            if keep.any():
                o, l = density(i, points[keep])
                om[keep] = o * psi0[keep] * chart_partition(points[keep])
                lf[keep] = l
            return om, lf
        task = PairingTask(f"{scn.label}:chart{i}", build, _GlobalRegion(n), True, k,
                           level, tuple(lambdas), jobs)
        remainder.append((i, extrapolate_mass(task)))

    total = sum(e.limit for _, _, e in local) + sum(e.limit for _, e in remainder)
    total_err = sum(e.error for _, _, e in local) + sum(e.error for _, e in remainder)
    aff = [e for z, _, e in local if abs(z[0]) > 0]
    affine = sum(e.limit for e in aff)
    affine_err = sum(e.error for e in aff)
    bound = prod(scn.degrees) / factorial(n - k)
    return BezoutReport(total, total_err, affine, affine_err, total - affine,
                        total_err, bound, local, remainder)


@dataclass
class _GlobalRegion:
    """Stand-in region covering a whole chart."""

    n: int
    span: float = CHART_SPAN

    theta_scale: int = 4

    def rule(self, level: int, tail: bool):
        return global_rule(self.n, level, self.span, self.theta_scale)


def write_chart_csv(path, report: BezoutReport):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["piece", "chart", "mass", "error"])
        for z, i, e in report.local:
            label = "zero[" + ":".join(f"{complex(c).real:.6g}{complex(c).imag:+.6g}j" for c in z) + "]"
            w.writerow([label, i, f"{e.limit:.12e}", f"{e.error:.12e}"])
        for i, e in report.remainder:
            w.writerow(["remainder", i, f"{e.limit:.12e}", f"{e.error:.12e}"])
