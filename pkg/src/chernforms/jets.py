"""Truncated power series in (z, zbar) at a batch of basepoints.

A :class:`Jet` stores the Taylor coefficients of a function of the 2n
independent Wirtinger variables ``z_1..z_n, zb_1..zb_n`` up to total degree
``order``.  Coefficients are stored in a graded monomial order (all degree-0
monomials, then degree 1, ...), so the order-k truncation of a jet is simply
the first ``size(k)`` rows of its coefficient array.  The trailing axis is a
batch axis: one jet object carries expansions at B basepoints at once.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass

import numpy as np


class SingularJetError(ArithmeticError):
    """Raised when inv/log/pow meets a vanishing constant term."""


class InsufficientOrderError(ValueError):
    """Raised when differentiating a jet whose usable order is exhausted."""


@dataclass(frozen=True, eq=False)
class JetSpace:
    """Monomial tables for ``nvars`` variables truncated at ``order``."""

    nvars: int
    order: int
    exponents: np.ndarray        # (N, nvars)
    degrees: np.ndarray          # (N,)
    offsets: tuple               # offsets[k] = number of monomials of degree < k
    index: dict
    # product table, sorted by output degree
    prod_i: np.ndarray
    prod_j: np.ndarray
    prod_k: np.ndarray
    prod_offsets: tuple          # prod_offsets[k] = number of triples with out-degree <= k
    conj_perm: np.ndarray        # index of the monomial with z/zb exponents swapped

    def size(self, k: int) -> int:
        return self.offsets[k + 1]

    def n_triples(self, k: int) -> int:
        return self.prod_offsets[k]

    @functools.lru_cache(maxsize=None)
    def scatter(self, k: int) -> np.ndarray:
        """Dense 0/1 matrix (size(k), n_triples(k)) summing products into outputs."""
        t = self.n_triples(k)
        s = np.zeros((self.size(k), t))
        s[self.prod_k[:t], np.arange(t)] = 1.0
        return s

    @functools.lru_cache(maxsize=None)
    def derivative_table(self, var: int, k: int):
        """(src, dst, factor) for d/d(var) mapping an order-k jet to order k-1."""
        n = self.size(k)
        exps = self.exponents[:n]
        src = np.nonzero(exps[:, var] > 0)[0]
        dst = np.empty_like(src)
        for pos, i in enumerate(src):
            e = list(exps[i])
            e[var] -= 1
            dst[pos] = self.index[tuple(e)]
        return src, dst, exps[src, var].astype(float)


@functools.lru_cache(maxsize=None)
def jet_space(nvars: int, order: int) -> JetSpace:
    exps = []
    offsets = [0]
    for deg in range(order + 1):
        block = [e for e in itertools.product(range(deg + 1), repeat=nvars) if sum(e) == deg]
        block.sort(reverse=True)
        exps.extend(block)
        offsets.append(len(exps))
    exps_arr = np.array(exps, dtype=np.int64).reshape(len(exps), nvars)
    degrees = exps_arr.sum(axis=1)
    index = {tuple(e): i for i, e in enumerate(exps)}

    triples = []
    for i, ei in enumerate(exps):
        for j, ej in enumerate(exps):
            if degrees[i] + degrees[j] <= order:
                k = index[tuple(a + b for a, b in zip(ei, ej))]
                triples.append((degrees[k], i, j, k))
    triples.sort()
    tr = np.array([t[1:] for t in triples], dtype=np.int64).reshape(-1, 3)
    out_deg = np.array([t[0] for t in triples], dtype=np.int64)
    prod_offsets = tuple(int(np.searchsorted(out_deg, k, side="right")) for k in range(order + 1))

    half = nvars // 2
    conj_perm = np.array(
        [index[tuple(e[half:]) + tuple(e[:half])] for e in exps], dtype=np.int64
    )
    return JetSpace(
        nvars=nvars,
        order=order,
        exponents=exps_arr,
        degrees=degrees,
        offsets=tuple(offsets),
        index=index,
        prod_i=np.ascontiguousarray(tr[:, 0]),
        prod_j=np.ascontiguousarray(tr[:, 1]),
        prod_k=np.ascontiguousarray(tr[:, 2]),
        prod_offsets=prod_offsets,
        conj_perm=conj_perm,
    )


def _table_space(nvars: int, order: int) -> JetSpace:
    # a single large table serves every order up to 6
    return jet_space(nvars, max(order, 4) if order <= 4 else order)


class Jet:
    """Truncated Taylor expansion of a function of (z, zbar), batched over basepoints.

    ``coeffs`` has shape ``(size(order), B)``.  Arithmetic between jets of
    different orders truncates to the smaller order.
    """

    __slots__ = ("n", "order", "coeffs")
    __array_priority__ = 100

    def __init__(self, n: int, order: int, coeffs):
        self.n = n
        self.order = order
        c = np.asarray(coeffs, dtype=complex)
        if c.ndim == 1:
            c = c[:, None]
        self.coeffs = c

    # -- construction ---------------------------------------------------------
    @property
    def space(self) -> JetSpace:
        return _table_space(2 * self.n, self.order)

    @property
    def batch(self) -> int:
        return self.coeffs.shape[1]

    @classmethod
    def constant(cls, n: int, order: int, value, batch: int = 1) -> "Jet":
        sp = _table_space(2 * n, order)
        val = np.broadcast_to(np.asarray(value, dtype=complex), (batch,))
        c = np.zeros((sp.size(order), batch), dtype=complex)
        c[0] = val
        return cls(n, order, c)

    @classmethod
    def variable(cls, n: int, order: int, var: int, base) -> "Jet":
        """The coordinate function number ``var`` (0..2n-1) expanded at ``base``."""
        sp = _table_space(2 * n, order)
        base = np.atleast_1d(np.asarray(base, dtype=complex))
        c = np.zeros((sp.size(order), base.shape[0]), dtype=complex)
        c[0] = base
        if order >= 1:
            e = [0] * (2 * n)
            e[var] = 1
            c[sp.index[tuple(e)]] = 1.0
        return cls(n, order, c)

    def value(self) -> np.ndarray:
        return self.coeffs[0]

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise InsufficientOrderError(f"cannot raise jet order {self.order} to {order}")
        if order == self.order:
            return self
        return Jet(self.n, order, self.coeffs[: self.space.size(order)])

    def coeff(self, zexp, zbexp) -> np.ndarray:
        key = tuple(zexp) + tuple(zbexp)
        return self.coeffs[self.space.index[key]]

    # -- arithmetic -----------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, Jet):
            if other.n != self.n:
                raise ValueError("jets over different chart dimensions")
            k = min(self.order, other.order)
            return self.truncate(k), other.truncate(k)
        other = np.asarray(other, dtype=complex)
        return self, Jet.constant(self.n, self.order, other, max(self.batch, other.size))

    def __add__(self, other):
        a, b = self._coerce(other)
        return Jet(a.n, a.order, a.coeffs + b.coeffs)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.n, self.order, -self.coeffs)

    def __sub__(self, other):
        a, b = self._coerce(other)
        return Jet(a.n, a.order, a.coeffs - b.coeffs)

    def __rsub__(self, other):
        a, b = self._coerce(other)
        return Jet(a.n, a.order, b.coeffs - a.coeffs)

    def __mul__(self, other):
        if not isinstance(other, Jet):
            # a scalar, or one value per batch point
            other = np.asarray(other, dtype=complex)
            scale = other if other.ndim == 0 else other.reshape(1, -1)
            return Jet(self.n, self.order, self.coeffs * scale)
        a, b = self._coerce(other)
        return Jet(a.n, a.order, jet_product(a.space, a.order, a.coeffs, b.coeffs))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.inv()
        return self * (1.0 / np.asarray(other, dtype=complex))

    def __rtruediv__(self, other):
        return self.inv() * other

    def __pow__(self, p):
        if isinstance(p, (int, np.integer)) and p >= 0:
            out = Jet.constant(self.n, self.order, 1.0, self.batch)
            base = self
            while p:
                if p & 1:
                    out = out * base
                base = base * base
                p >>= 1
            return out
        return self.power(p)

    def conj(self) -> "Jet":
        """Complex conjugate function: swaps z and zb exponents, conjugates values."""
        perm = self.space.conj_perm[: self.space.size(self.order)]
        return Jet(self.n, self.order, np.conj(self.coeffs[perm]))

    # -- scalar series composition ---------------------------------------------
    def _split(self):
        c0 = self.coeffs[0].copy()
        if np.any(np.abs(c0) == 0.0):
            raise SingularJetError("vanishing constant term")
        h = self.coeffs.copy()
        h[0] = 0.0
        return c0, Jet(self.n, self.order, h)

    def _compose(self, c0, derivs):
        """Sum_k derivs[k] * h^k / k!  where h = self - c0."""
        _, h = self._split()
        out = Jet.constant(self.n, self.order, derivs[0], self.batch)
        hk = Jet.constant(self.n, self.order, 1.0, self.batch)
        fact = 1.0
        for k in range(1, self.order + 1):
            hk = hk * h
            fact *= k
            out = out + hk * (derivs[k] / fact)
        return out

    def inv(self) -> "Jet":
        c0, _ = self._split()
        derivs = [(-1.0) ** k * np.prod(np.arange(1, k + 1)) / c0 ** (k + 1)
                  for k in range(self.order + 1)]
        return self._compose(c0, derivs)

    def log(self) -> "Jet":
        c0, _ = self._split()
        derivs = [np.log(c0)] + [
            (-1.0) ** (k - 1) * np.prod(np.arange(1, k)) / c0 ** k
            for k in range(1, self.order + 1)
        ]
        return self._compose(c0, derivs)

    def exp(self) -> "Jet":
        c0 = self.coeffs[0]
        e0 = np.exp(c0)
        h = self.coeffs.copy()
        h[0] = 0.0
        hj = Jet(self.n, self.order, h)
        out = Jet.constant(self.n, self.order, e0, self.batch)
        hk = Jet.constant(self.n, self.order, 1.0, self.batch)
        fact = 1.0
        for k in range(1, self.order + 1):
            hk = hk * hj
            fact *= k
            out = out + hk * (e0 / fact)
        return out

    def power(self, p: float) -> "Jet":
        c0, _ = self._split()
        derivs = []
        coef = 1.0
        for k in range(self.order + 1):
            derivs.append(coef * c0 ** (p - k))
            coef *= (p - k)
        return self._compose(c0, derivs)

    def sqrt(self) -> "Jet":
        return self.power(0.5)

    # -- differentiation ------------------------------------------------------
    def diff(self, var: int) -> "Jet":
        """Partial derivative in Wirtinger variable ``var`` (0..2n-1)."""
        if self.order < 1:
            raise InsufficientOrderError("jet order exhausted")
        src, dst, fac = self.space.derivative_table(var, self.order)
        out = np.zeros((self.space.size(self.order - 1), self.batch), dtype=complex)
        out[dst] = self.coeffs[src] * fac[:, None]
        return Jet(self.n, self.order - 1, out)

    def __repr__(self):
        return f"Jet(n={self.n}, order={self.order}, batch={self.batch})"


def jet_product(space: JetSpace, order: int, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Truncated product of coefficient arrays of shape (size(order), ...)."""
    if order == 0:
        return a * b
    t = space.n_triples(order)
    prod = a[space.prod_i[:t]] * b[space.prod_j[:t]]
    s = space.scatter(order)
    return np.tensordot(s, prod, axes=(1, 0))


def jet_matrix_inverse(mat):
    """Inverse of an m x m matrix of jets by Gauss-Jordan (no pivoting: PD input)."""
    m = len(mat)
    a = [[mat[i][j] for j in range(m)] for i in range(m)]
    n, order, batch = a[0][0].n, a[0][0].order, a[0][0].batch
    inv = [[Jet.constant(n, order, 1.0 if i == j else 0.0, batch) for j in range(m)]
           for i in range(m)]
    for k in range(m):
        piv = a[k][k].inv()
        a[k] = [x * piv for x in a[k]]
        inv[k] = [x * piv for x in inv[k]]
        for i in range(m):
            if i == k:
                continue
            fac = a[i][k]
            a[i] = [x - fac * y for x, y in zip(a[i], a[k])]
            inv[i] = [x - fac * y for x, y in zip(inv[i], inv[k])]
    return inv


class Chart:
    """Coordinate jets for a chart of dimension ``n`` at a batch of basepoints."""

    def __init__(self, points, order: int = 4):
        pts = np.asarray(points, dtype=complex)
        if pts.ndim == 1:
            pts = pts[None, :]
        self.points = pts
        self.n = pts.shape[1]
        self.order = order

    @property
    def batch(self) -> int:
        return self.points.shape[0]

    def z(self, a: int) -> Jet:
        return Jet.variable(self.n, self.order, a, self.points[:, a])

    def zb(self, a: int) -> Jet:
        return Jet.variable(self.n, self.order, self.n + a, np.conj(self.points[:, a]))

    def const(self, value) -> Jet:
        return Jet.constant(self.n, self.order, value, self.batch)

    def norm2(self) -> Jet:
        out = self.const(0.0)
        for a in range(self.n):
            out = out + self.z(a) * self.zb(a)
        return out
