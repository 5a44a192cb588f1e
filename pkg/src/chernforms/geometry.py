"""Chern connection, curvature and Chern forms of a Hermitian metric on a chart."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .forms import ALEPH, ConnectionAction, covariant, del_, delbar, lift
from .grassmann import (
    GeneratorSet,
    Multivector,
    berezin_e,
    degree_project,
    e_degree_project,
    exp_even,
    identity_tilde,
    matrix_tilde,
    matrix_untilde,
    wedge,
)
from .jets import Chart, jet_matrix_inverse


class SingularMetricError(ValueError):
    pass


class ConsistencyError(ArithmeticError):
    """Two independent routes to the same quantity disagree."""


class DegreeError(ValueError):
    pass


CHERN_ROUTE_TOL = 1e-10


@dataclass(frozen=True)
class MetricField:
    """Gram matrix G of a Hermitian metric in a holomorphic frame, as jets.

    The pairing is <xi, eta> = eta^H G xi.
    """

    chart: Chart
    gram: tuple

    @property
    def m(self) -> int:
        return len(self.gram)

    @property
    def n(self) -> int:
        return self.chart.n

    @classmethod
    def from_matrix(cls, chart, mat):
        return cls(chart, tuple(tuple(row) for row in mat))

    @classmethod
    def trivial(cls, chart, m):
        return cls.from_matrix(chart, [[chart.const(1.0 if i == j else 0.0) for j in range(m)]
                                       for i in range(m)])

    @classmethod
    def diagonal(cls, chart, entries):
        m = len(entries)
        return cls.from_matrix(chart, [[entries[i] if i == j else chart.const(0.0)
                                        for j in range(m)] for i in range(m)])

    def values(self) -> np.ndarray:
        """Gram matrices at the basepoints, shape (B, m, m)."""
        m = self.m
        out = np.empty((self.chart.batch, m, m), dtype=complex)
        for i in range(m):
            for j in range(m):
                out[:, i, j] = self.gram[i][j].value()
        return out

    def check_positive(self, tol=0.0):
        vals = self.values()
        herm = np.abs(vals - np.conj(np.swapaxes(vals, 1, 2))).max()
        if herm > 1e-10 * max(1.0, np.abs(vals).max()):
            raise SingularMetricError(f"Gram matrix is not Hermitian (defect {herm:.2e})")
        low = np.linalg.eigvalsh(vals).min()
        if not low > tol:
            raise SingularMetricError(f"Gram matrix not positive definite (min eigenvalue {low:.3e})")


class BundleGeometry:
    """Connection and curvature data of the Chern connection of a metric."""

    def __init__(self, metric: MetricField, gens: GeneratorSet, theta, curvature):
        self.metric = metric
        self.gens = gens
        self.theta = theta
        self.curvature = curvature
        self.action = ConnectionAction(gens, theta)

    @property
    def n(self):
        return self.gens.n

    @property
    def m(self):
        return self.gens.m

    @property
    def batch(self):
        return self.metric.chart.batch

    @cached_property
    def curvature_tilde(self) -> Multivector:
        return matrix_tilde(self.curvature)

    @cached_property
    def identity_tilde(self) -> Multivector:
        return identity_tilde(self.gens, self.curvature[0][0].order, self.batch)

    def D(self, a: Multivector) -> Multivector:
        return covariant(self.action, a)

    def bianchi_residual(self) -> float:
        return self.D(self.curvature_tilde).max_abs()

    def one(self) -> Multivector:
        return Multivector.scalar(self.gens, 1.0, self.curvature[0][0].order, self.batch)


def chern_connection(metric: MetricField, check=True) -> BundleGeometry:
    """theta = G^{-1} del G and Theta = delbar theta."""
    if check:
        metric.check_positive()
    gens = GeneratorSet(metric.n, metric.m)
    m = metric.m
    ginv = jet_matrix_inverse([list(r) for r in metric.gram])
    dG = [[del_(lift(gens, metric.gram[i][k])) for k in range(m)] for i in range(m)]
    theta = []
    for j in range(m):
        row = []
        for k in range(m):
            acc = dG[0][k] * ginv[j][0]
            for i in range(1, m):
                acc = acc + dG[i][k] * ginv[j][i]
            row.append(acc)
        theta.append(row)
    curvature = [[delbar(theta[j][k]) for k in range(m)] for j in range(m)]
    return BundleGeometry(metric, gens, theta, curvature)


def det_even(mat) -> Multivector:
    """Determinant of a matrix of even (commuting) forms by cofactor expansion."""
    m = len(mat)

    memo = {}

    def minor(row, cols):
        if row == m:
            return None
        key = (row, cols)
        if key in memo:
            return memo[key]
        acc = None
        sign = 1.0
        for c in range(m):
            if not cols >> c & 1:
                continue
            sub = minor(row + 1, cols & ~(1 << c))
            term = mat[row][c] if sub is None else wedge(mat[row][c], sub)
            term = term * sign
            acc = term if acc is None else acc + term
            sign = -sign
        memo[key] = acc
        return acc

    return minor(0, (1 << m) - 1)


def chern_form_berezin(geom: BundleGeometry) -> Multivector:
    return berezin_e(exp_even(geom.curvature_tilde * ALEPH + geom.identity_tilde))


def chern_form_det(geom: BundleGeometry) -> Multivector:
    one = geom.one()
    m = geom.m
    mat = [[geom.curvature[j][k] * ALEPH + (one if j == k else 0 * one) for k in range(m)]
           for j in range(m)]
    return det_even(mat)


def chern_form(geom: BundleGeometry, tol: float = CHERN_ROUTE_TOL) -> Multivector:
    """Total Chern form; the Berezin and determinant routes must agree."""
    a = chern_form_berezin(geom)
    b = chern_form_det(geom)
    gap = (a - b).max_abs()
    scale = max(1.0, a.max_abs())
    if gap > tol * scale:
        raise ConsistencyError(f"Chern form routes disagree by {gap:.3e}")
    return a


def chern_component(c: Multivector, k: int) -> Multivector:
    return degree_project(c, k, k)


def endo_square_tilde(gamma_tilde: Multivector) -> Multivector:
    """(gamma ^ gamma)~ from the matrix of gamma."""
    g = matrix_untilde(gamma_tilde)
    m = len(g)
    out = []
    for i in range(m):
        row = []
        for k in range(m):
            acc = wedge(g[i][0], g[0][k])
            for j in range(1, m):
                acc = acc + wedge(g[i][j], g[j][k])
            row.append(acc)
        out.append(row)
    return matrix_tilde(out)


def deformed_curvature_tilde(geom: BundleGeometry, gamma_tilde: Multivector, t: float):
    """Curvature of D - t gamma."""
    return (geom.curvature_tilde - geom.D(gamma_tilde) * t
            + endo_square_tilde(gamma_tilde) * (t * t))


def transgress_numeric(geom: BundleGeometry, gamma_tilde: Multivector, steps: int = 16):
    """Gauss-Legendre t-integral of int_e aleph gamma~ ^ exp(aleph Theta_t~ + I~)."""
    g = geom.gens
    if gamma_tilde.nterms == 0:
        return Multivector.zero(g, gamma_tilde.order, gamma_tilde.batch)
    if e_degree_project(gamma_tilde, 1, 1).nterms != gamma_tilde.nterms or \
            degree_project(gamma_tilde, 1, 0).nterms != gamma_tilde.nterms:
        raise DegreeError("deformation must be an End(E)-valued (1,0)-form")
    nodes, weights = np.polynomial.legendre.leggauss(steps)
    sq = endo_square_tilde(gamma_tilde)
    Dg = geom.D(gamma_tilde)
    total = None
    for x, w in zip(nodes, weights):
        t = 0.5 * (x + 1.0)
        th = geom.curvature_tilde - Dg * t + sq * (t * t)
        val = berezin_e(wedge(gamma_tilde * ALEPH, exp_even(th * ALEPH + geom.identity_tilde)))
        val = val * (0.5 * w)
        total = val if total is None else total + val
    return total
