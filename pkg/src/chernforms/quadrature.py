"""Tensor-product quadrature on balls in C^n with grading toward singular sets.

Nodes use spherical coordinates around a centre point: polar coordinates for
n = 1 and Hopf coordinates ``z1 = rho cos(eta) e^{i t1}, z2 = rho sin(eta) e^{i t2}``
for n = 2.  The radius is integrated in ``log rho`` on geometric panels
shrinking toward the centre, so integrands behaving like rho^(alpha-1) are
resolved for small alpha; the part below the inner cutoff is added from a
power-law fit (see :func:`power_tail`).  When coordinate hyperplanes through
the centre are singular, the ``eta`` direction is graded toward both ends.
"""

from __future__ import annotations

import multiprocessing
from dataclasses import dataclass, field

import numpy as np

INNER_CUTOFF = 1e-6
PANEL_RATIO = 2.0
CHUNK = 2048


class UnsupportedGeometryError(ValueError):
    pass


class QuadratureFailure(RuntimeError):
    pass


def gauss_legendre(k: int, a: float, b: float):
    x, w = np.polynomial.legendre.leggauss(k)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


def graded_log_panels(upper: float, cutoff: float, nodes: int, ratio: float = PANEL_RATIO,
                      log_scale: bool = True):
    """Nodes/weights for ds on [cutoff, upper] over geometric panels.

    Gauss-Legendre runs in log s when ``log_scale`` is set (best for pure
    powers) and in s otherwise (exact for polynomials, nearly as good on
    s^alpha since every panel sits at relative distance one from 0).
    """
    edges = [upper]
    while edges[-1] / ratio > cutoff * (1 + 1e-12):
        edges.append(edges[-1] / ratio)
    edges.append(cutoff)
    xs, ws = [], []
    for hi, lo in zip(edges[:-1], edges[1:]):
        if hi <= lo:
            continue
        if log_scale:
            t, w = gauss_legendre(nodes, np.log(lo), np.log(hi))
            s = np.exp(t)
            w = w * s
        else:
            s, w = gauss_legendre(nodes, lo, hi)
        xs.append(s)
        ws.append(w)
    return np.concatenate(xs), np.concatenate(ws)


def trapezoid_circle(k: int):
    return 2 * np.pi * np.arange(k) / k, np.full(k, 2 * np.pi / k)


def graded_both_ends(a: float, b: float, nodes: int, cutoff: float, ratio: float = 4.0):
    mid = 0.5 * (a + b)
    s, w = graded_log_panels(mid - a, cutoff, nodes, ratio)
    left = a + s
    right = b - s
    return np.concatenate([left, right[::-1]]), np.concatenate([w, w[::-1]])


@dataclass
class SphericalRule:
    """Nodes in a ball, plus probe shells for the inner power-law tail."""

    points: np.ndarray
    weights: np.ndarray
    probe_points: tuple = ()
    probe_weights: tuple = ()
    inner: float = 0.0

    @property
    def size(self) -> int:
        return self.points.shape[0] + sum(p.shape[0] for p in self.probe_points)


def _angular(n: int, level: int, graded: bool, eta_cutoff: float, theta_scale: int = 1):
    """Unit directions (K, n) and weights, Jacobian included (without rho)."""
    if n == 1:
        th, w = trapezoid_circle(max(4, level) * theta_scale)
        return np.exp(1j * th)[:, None], w
    if n == 2:
        if graded:
            eta, we = graded_both_ends(0.0, np.pi / 2, max(3, level // 2), eta_cutoff)
        else:
            eta, we = gauss_legendre(2 * level, 0.0, np.pi / 2)
        we = we * np.cos(eta) * np.sin(eta)
        th, wt = trapezoid_circle(max(4, level) * theta_scale)
        E, T1, T2 = np.meshgrid(np.arange(eta.size), np.arange(th.size), np.arange(th.size),
                                indexing="ij")
        E, T1, T2 = E.ravel(), T1.ravel(), T2.ravel()
        dirs = np.stack([np.cos(eta[E]) * np.exp(1j * th[T1]),
                         np.sin(eta[E]) * np.exp(1j * th[T2])], axis=1)
        return dirs, we[E] * wt[T1] * wt[T2]
    raise UnsupportedGeometryError(f"spherical quadrature implemented for n <= 2, got n={n}")


def radial_nodes(level: int) -> int:
    return max(3, level // 2 + 1)


def spherical_rule(n: int, center, radius: float, level: int = 8, *, graded_angles=False,
                   cutoff: float = INNER_CUTOFF, tail: bool = True) -> SphericalRule:
    center = np.asarray(center, dtype=complex).reshape(n)
    dirs, wa = _angular(n, level, graded_angles, cutoff)
    rho, wr = graded_log_panels(radius, cutoff * radius, radial_nodes(level), log_scale=False)
    jac = wr * rho ** (2 * n - 1)
    R, A = np.meshgrid(np.arange(rho.size), np.arange(wa.size), indexing="ij")
    R, A = R.ravel(), A.ravel()
    pts = center[None, :] + rho[R, None] * dirs[A]
    wts = jac[R] * wa[A]
    probes_p, probes_w = (), ()
    inner = cutoff * radius
    if tail:
        probes_p = tuple(center[None, :] + r * dirs for r in (inner, inner / 2))
        probes_w = tuple(wa * r ** (2 * n) for r in (inner, inner / 2))
    return SphericalRule(pts, wts, probes_p, probes_w, inner)


def global_rule(n: int, level: int = 8, span: float = 9.0, theta_scale: int = 1) -> SphericalRule:
    """All of C^n around the origin: log rho in [-span, span] on unit panels."""
    dirs, wa = _angular(n, level, False, INNER_CUTOFF, theta_scale)
    edges = np.arange(-span, span + 1e-12, 1.0)
    ts, ws = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        t, w = gauss_legendre(level, lo, hi)
        ts.append(t)
        ws.append(w)
    t = np.concatenate(ts)
    rho = np.exp(t)
    jac = np.concatenate(ws) * rho ** (2 * n)
    R, A = np.meshgrid(np.arange(rho.size), np.arange(wa.size), indexing="ij")
    R, A = R.ravel(), A.ravel()
    return SphericalRule(rho[R, None] * dirs[A], jac[R] * wa[A])


def power_tail(j0: complex, j1: complex) -> complex:
    """Integral below the cutoff for J(t) ~ e^{alpha t}: J(t0)/alpha, alpha from J(t0)/J(t0 - log 2)."""
    if j0 == 0 or j1 == 0:
        return 0.0
    ratio = j0 / j1
    if abs(ratio.imag) > 1e-6 * abs(ratio) or ratio.real <= 1.0:
        return 0.0
    alpha = np.log2(ratio.real)
    return j0 / alpha


# -- chunked, optionally parallel node evaluation ---------------------------------

_WORK = None


def _call(args):
    lo, hi = args
    return _WORK(_POINTS[lo:hi])


_POINTS = None


def evaluate_nodes(fn, points: np.ndarray, jobs: int = 1, chunk: int = CHUNK):
    """Apply ``fn(points) -> tuple of arrays`` chunkwise; outputs concatenated in node order."""
    global _WORK, _POINTS
    n = points.shape[0]
    spans = [(lo, min(n, lo + chunk)) for lo in range(0, n, chunk)]
    if not spans:
        return None
    if jobs > 1 and len(spans) > 1:
        _WORK, _POINTS = fn, points
        try:
            ctx = multiprocessing.get_context("fork")
            with ctx.Pool(jobs) as pool:
                parts = pool.map(_call, spans)
        finally:
            _WORK, _POINTS = None, None
    else:
        parts = [fn(points[lo:hi]) for lo, hi in spans]
    return tuple(np.concatenate([p[i] for p in parts]) for i in range(len(parts[0])))


@dataclass
class NodeValues:
    """Lambda-free integrand data at the nodes of a rule.

    The integrand at exponent lam is ``lam * exp(lam * logf2) * omega`` when
    ``logf2`` is present, otherwise just ``omega``.
    """

    weights: np.ndarray
    omega: np.ndarray
    logf2: np.ndarray | None
    probes: list = field(default_factory=list)   # [(weights, omega, logf2)] x2

    @property
    def nodes(self) -> int:
        return self.weights.size + sum(p[0].size for p in self.probes)

    def total(self, lam: float | None) -> complex:
        vals = self._integrand(self.omega, self.logf2, lam)
        out = complex(np.dot(self.weights, vals))
        if len(self.probes) == 2:
            j = [complex(np.dot(w, self._integrand(o, l, lam))) for w, o, l in self.probes]
            out += power_tail(j[0], j[1])
        return out

    @staticmethod
    def _integrand(omega, logf2, lam):
        if logf2 is None or lam is None:
            return omega
        return lam * np.exp(lam * logf2) * omega


def sample_rule(fn, rule: SphericalRule, jobs: int = 1, with_log: bool = True) -> NodeValues:
    out = evaluate_nodes(fn, rule.points, jobs)
    omega = out[0]
    logf2 = out[1] if with_log else None
    probes = []
    for p, w in zip(rule.probe_points, rule.probe_weights):
        o = fn(p)
        probes.append((w, o[0], o[1] if with_log else None))
    return NodeValues(rule.weights, omega, logf2, probes)
