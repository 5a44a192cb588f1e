"""Super-exterior algebra over jets: forms with values in Lambda(E + E*).

Generators are all odd and kept in the fixed order
``dz_1..dz_n, dzb_1..dzb_n, e_1..e_m, e*_1..e*_m``; a basis blade is a
bitmask over that order.  Coefficients are :class:`~chernforms.jets.Jet`
objects (possibly of order 0, i.e. plain batched values).
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np

from . import kernels
from .jets import Jet, _table_space

PRUNE = 1e-300


class DimensionMismatchError(ValueError):
    pass


class ParityError(ValueError):
    pass


@dataclass(frozen=True)
class GeneratorSet:
    n: int
    m: int

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ValueError("need n >= 1 and m >= 1")

    @property
    def count(self) -> int:
        return 2 * self.n + 2 * self.m

    def dz(self, a: int) -> int:
        return 1 << a

    def dzb(self, a: int) -> int:
        return 1 << (self.n + a)

    def e(self, j: int) -> int:
        return 1 << (2 * self.n + j)

    def estar(self, k: int) -> int:
        return 1 << (2 * self.n + self.m + k)

    @property
    def holo_bits(self) -> int:
        return (1 << self.n) - 1

    @property
    def antiholo_bits(self) -> int:
        return ((1 << self.n) - 1) << self.n

    @property
    def form_bits(self) -> int:
        return (1 << (2 * self.n)) - 1

    @property
    def e_bits(self) -> int:
        return ((1 << self.m) - 1) << (2 * self.n)

    @property
    def estar_bits(self) -> int:
        return ((1 << self.m) - 1) << (2 * self.n + self.m)

    @property
    def top_form(self) -> int:
        return self.form_bits

    def label(self, mask: int) -> str:
        names = ([f"dz{a + 1}" for a in range(self.n)] + [f"dzb{a + 1}" for a in range(self.n)]
                 + [f"e{j + 1}" for j in range(self.m)] + [f"e*{j + 1}" for j in range(self.m)])
        parts = [names[b] for b in range(self.count) if mask >> b & 1]
        return "^".join(parts) if parts else "1"


def _popcount(x: np.ndarray) -> np.ndarray:
    return np.bitwise_count(x).astype(np.int64)


class Multivector:
    """Immutable sparse element of Lambda(T* + E + E*) with jet coefficients.

    ``masks`` is a sorted int64 array of blade bitmasks and ``coeffs`` the
    matching coefficient stack of shape ``(nterms, size(order), B)``.
    """

    __slots__ = ("gens", "n", "order", "masks", "coeffs")

    def __init__(self, gens: GeneratorSet, order: int, masks, coeffs, *, prune=True):
        self.gens = gens
        self.n = gens.n
        self.order = order
        masks = np.asarray(masks, dtype=np.int64)
        coeffs = np.asarray(coeffs, dtype=complex)
        if prune and masks.size:
            keep = np.abs(coeffs).reshape(masks.size, -1).max(axis=1) >= PRUNE
            if not keep.all():
                masks, coeffs = masks[keep], coeffs[keep]
        self.masks = masks
        self.coeffs = np.ascontiguousarray(coeffs)

    # -- constructors ---------------------------------------------------------
    @classmethod
    def zero(cls, gens, order=0, batch=1):
        size = _table_space(2 * gens.n, order).size(order)
        return cls(gens, order, np.empty(0, dtype=np.int64),
                   np.zeros((0, size, batch), dtype=complex))

    @classmethod
    def scalar(cls, gens, value, order=0, batch=1):
        if isinstance(value, Jet):
            return cls.from_terms(gens, {0: value})
        return cls.from_terms(gens, {0: Jet.constant(gens.n, order, value, batch)})

    @classmethod
    def from_terms(cls, gens, terms: dict):
        """Build from {mask: Jet}; masks are canonical blades (sign +1)."""
        if not terms:
            return cls.zero(gens)
        jets = list(terms.values())
        order = min(j.order for j in jets)
        batch = max(j.batch for j in jets)
        masks = np.array(sorted(terms), dtype=np.int64)
        size = _table_space(2 * gens.n, order).size(order)
        coeffs = np.zeros((masks.size, size, batch), dtype=complex)
        for i, mk in enumerate(masks):
            coeffs[i] = terms[int(mk)].truncate(order).coeffs
        return cls(gens, order, masks, coeffs)

    @classmethod
    def generator(cls, gens, mask, order=0, batch=1):
        return cls.from_terms(gens, {mask: Jet.constant(gens.n, order, 1.0, batch)})

    # -- basic structure ------------------------------------------------------
    @property
    def batch(self) -> int:
        return self.coeffs.shape[2]

    @property
    def nterms(self) -> int:
        return self.masks.size

    def term(self, mask: int) -> Jet:
        i = np.searchsorted(self.masks, mask)
        if i < self.masks.size and self.masks[i] == mask:
            return Jet(self.n, self.order, self.coeffs[i])
        return Jet.constant(self.n, self.order, 0.0, self.batch)

    def terms(self):
        for i, mk in enumerate(self.masks):
            yield int(mk), Jet(self.n, self.order, self.coeffs[i])

    def truncate(self, order: int) -> "Multivector":
        if order == self.order:
            return self
        if order > self.order:
            from .jets import InsufficientOrderError
            raise InsufficientOrderError(f"multivector order {self.order} < {order}")
        size = _table_space(2 * self.n, order).size(order)
        return Multivector(self.gens, order, self.masks, self.coeffs[:, :size], prune=False)

    def values(self) -> "Multivector":
        return self.truncate(0)

    def _check(self, other):
        if not isinstance(other, Multivector):
            raise TypeError("expected a Multivector")
        if other.gens != self.gens:
            raise DimensionMismatchError(f"{self.gens} vs {other.gens}")

    def _aligned(self, other):
        self._check(other)
        k = min(self.order, other.order)
        a, b = self.truncate(k), other.truncate(k)
        if a.batch != b.batch:
            B = max(a.batch, b.batch)
            a = Multivector(a.gens, k, a.masks, np.broadcast_to(a.coeffs, a.coeffs.shape[:2] + (B,)),
                            prune=False)
            b = Multivector(b.gens, k, b.masks, np.broadcast_to(b.coeffs, b.coeffs.shape[:2] + (B,)),
                            prune=False)
        return a, b

    # -- linear structure -----------------------------------------------------
    def __add__(self, other):
        if not isinstance(other, Multivector):
            if np.isscalar(other) or isinstance(other, Jet):
                other = Multivector.scalar(self.gens, other, self.order, self.batch)
            else:
                return NotImplemented
        a, b = self._aligned(other)
        masks = np.concatenate([a.masks, b.masks])
        coeffs = np.concatenate([a.coeffs, b.coeffs])
        return _combine(a.gens, a.order, masks, coeffs)

    __radd__ = __add__

    def __neg__(self):
        return Multivector(self.gens, self.order, self.masks, -self.coeffs, prune=False)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        """Scalar or jet multiple (coefficient-wise)."""
        if isinstance(other, Multivector):
            return wedge(self, other)
        if isinstance(other, Jet):
            k = min(self.order, other.order)
            a = self.truncate(k)
            j = other.truncate(k)
            if a.nterms == 0:
                return a
            if k == 0:
                c = a.coeffs * j.coeffs[None]
            else:
                sp = _table_space(2 * self.n, k)
                t = sp.n_triples(k)
                prod = a.coeffs[:, sp.prod_i[:t]] * j.coeffs[None, sp.prod_j[:t]]
                c = np.einsum("kt,ptb->pkb", sp.scatter(k), prod)
            return Multivector(self.gens, k, a.masks, c)
        other = np.asarray(other, dtype=complex)
        if other.ndim == 1:
            other = other[None, None, :]
        return Multivector(self.gens, self.order, self.masks, self.coeffs * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.inv()
        return self * (1.0 / np.asarray(other, dtype=complex))

    def __xor__(self, other):
        return wedge(self, other)

    # -- gradings -------------------------------------------------------------
    def parities(self) -> np.ndarray:
        return _popcount(self.masks) & 1

    def is_even(self) -> bool:
        return not self.parities().any()

    def select(self, keep: np.ndarray) -> "Multivector":
        return Multivector(self.gens, self.order, self.masks[keep], self.coeffs[keep], prune=False)

    def scalar_part(self) -> Jet:
        return self.term(0)

    def conj(self) -> "Multivector":
        """Complex conjugate of a pure form (no e/e* generators).

        conj swaps dz_a and dzb_a; reordering the blade produces a sign.
        """
        g = self.gens
        if (self.masks & (g.e_bits | g.estar_bits)).any():
            raise ValueError("conj is defined for scalar forms only")
        n = self.n
        new_masks = ((self.masks & g.holo_bits) << n) | ((self.masks & g.antiholo_bits) >> n)
        p = _popcount(self.masks & g.holo_bits)
        q = _popcount(self.masks & g.antiholo_bits)
        # dz-block then dzb-block: swapping the two blocks costs p*q,
        # and within-block order is preserved
        sign = np.where((p * q) & 1, -1.0, 1.0)
        perm = _table_space(2 * n, self.order).conj_perm[: self.coeffs.shape[1]]
        coeffs = np.conj(self.coeffs[:, perm]) * sign[:, None, None]
        return _combine(g, self.order, new_masks, coeffs)

    def max_abs(self) -> float:
        return float(np.abs(self.coeffs).max()) if self.nterms else 0.0

    def max_abs_values(self) -> float:
        return float(np.abs(self.coeffs[:, 0]).max()) if self.nterms else 0.0

    def __repr__(self):
        shown = ", ".join(self.gens.label(int(m)) for m in self.masks[:8])
        more = "..." if self.nterms > 8 else ""
        return f"Multivector(order={self.order}, batch={self.batch}, [{shown}{more}])"


def _combine(gens, order, masks, coeffs) -> Multivector:
    if masks.size == 0:
        return Multivector(gens, order, masks, coeffs)
    uniq, inv = np.unique(masks, return_inverse=True)
    if uniq.size == masks.size:
        idx = np.argsort(masks)
        return Multivector(gens, order, masks[idx], coeffs[idx])
    out = np.zeros((uniq.size,) + coeffs.shape[1:], dtype=complex)
    np.add.at(out, inv, coeffs)
    return Multivector(gens, order, uniq, out)


def wedge(a: Multivector, b: Multivector) -> Multivector:
    """Exterior product; all generators anticommute."""
    a, b = a._aligned(b)
    if a.nterms == 0 or b.nterms == 0:
        return Multivector.zero(a.gens, a.order, a.batch)
    sp = _table_space(2 * a.n, a.order)
    t = sp.n_triples(a.order)
    masks, coeffs = kernels.wedge_terms(
        a.masks, a.coeffs, b.masks, np.ascontiguousarray(b.coeffs),
        sp.prod_i[:t], sp.prod_j[:t], sp.prod_k[:t],
        sp.size(a.order), a.gens.count,
    )
    return Multivector(a.gens, a.order, masks, coeffs)


def wedge_all(*factors: Multivector) -> Multivector:
    out = factors[0]
    for f in factors[1:]:
        out = wedge(out, f)
    return out


def power(a: Multivector, k: int) -> Multivector:
    out = Multivector.scalar(a.gens, 1.0, a.order, a.batch)
    for _ in range(k):
        out = wedge(out, a)
    return out


def divided_power(a: Multivector, k: int) -> Multivector:
    """a^k / k!"""
    return power(a, k) * (1.0 / factorial(k))


def exp_even(a: Multivector) -> Multivector:
    """exp(a) = sum a^k/k! for an even element; the series terminates."""
    if not a.is_even():
        raise ParityError("exp_even needs an even element")
    s = a.scalar_part()
    nil = a.select(a.masks != 0)
    out = Multivector.scalar(a.gens, 1.0, a.order, a.batch)
    term = out
    k = 0
    while True:
        k += 1
        term = wedge(term, nil) * (1.0 / k)
        if term.nterms == 0:
            break
        out = out + term
    if a.nterms and a.masks[0] == 0:
        out = out * s.exp()
    return out


def top_e_sign(m: int) -> float:
    """Sign relating e1^e1*^...^em^em* to the canonical blade e1..em e1*..em*."""
    return -1.0 if (m * (m - 1) // 2) % 2 else 1.0


def berezin_e(a: Multivector) -> Multivector:
    """The e-integral: coefficient form of I_m = (sum e_j^e_j*)^m/m!."""
    g = a.gens
    full = g.e_bits | g.estar_bits
    keep = (a.masks & full) == full
    masks = a.masks[keep] & g.form_bits
    coeffs = a.coeffs[keep] * top_e_sign(g.m)
    return Multivector(g, a.order, masks, coeffs, prune=False)


def degree_project(a: Multivector, p: int, q: int) -> Multivector:
    g = a.gens
    hp = _popcount(a.masks & g.holo_bits)
    hq = _popcount(a.masks & g.antiholo_bits)
    return a.select((hp == p) & (hq == q))


def e_degree_project(a: Multivector, j: int, k: int) -> Multivector:
    """Terms with exactly j generators e and k generators e*."""
    g = a.gens
    return a.select((_popcount(a.masks & g.e_bits) == j) & (_popcount(a.masks & g.estar_bits) == k))


def identity_tilde(gens, order=0, batch=1) -> Multivector:
    """I~ = sum_j e_j ^ e_j*."""
    one = Jet.constant(gens.n, order, 1.0, batch)
    return Multivector.from_terms(gens, {gens.e(j) | gens.estar(j): one for j in range(gens.m)})


def matrix_tilde(mat) -> Multivector:
    """sum_jk A_jk ^ e_j ^ e_k* for a matrix of form-valued multivectors."""
    m = len(mat)
    pieces = []
    for j in range(m):
        for k in range(m):
            x = mat[j][k]
            if isinstance(x, Multivector):
                g = x.gens
                ej = Multivector.generator(g, g.e(j) | g.estar(k), x.order, x.batch)
                pieces.append(wedge(x, ej))
    out = pieces[0]
    for p in pieces[1:]:
        out = out + p
    return out


def matrix_untilde(a: Multivector):
    """Inverse of :func:`matrix_tilde` for elements with e-degree (1, 1)."""
    g = a.gens
    emask = g.e_bits | g.estar_bits
    bad = e_degree_project(a, 1, 1).nterms != a.nterms
    if bad:
        raise ValueError("element is not End(E)-valued (e-degree must be (1,1))")
    out = []
    for j in range(g.m):
        row = []
        for k in range(g.m):
            sel = (a.masks & emask) == (g.e(j) | g.estar(k))
            sub = a.select(sel)
            # blade = F ^ e_j ^ e_k* with F first in canonical order: no sign
            row.append(Multivector(g, a.order, sub.masks & g.form_bits, sub.coeffs, prune=False))
        out.append(row)
    return out


def vector_e(col) -> Multivector:
    """sum_j x_j ^ e_j for a column of form-valued multivectors."""
    pieces = [wedge(x, Multivector.generator(x.gens, x.gens.e(j), x.order, x.batch))
              for j, x in enumerate(col)]
    out = pieces[0]
    for p in pieces[1:]:
        out = out + p
    return out


def vector_estar(row) -> Multivector:
    """sum_k x_k ^ e_k* for a row of form-valued multivectors."""
    pieces = [wedge(x, Multivector.generator(x.gens, x.gens.estar(k), x.order, x.batch))
              for k, x in enumerate(row)]
    out = pieces[0]
    for p in pieces[1:]:
        out = out + p
    return out


def interior(a: Multivector, bit: int) -> Multivector:
    """Left interior derivative removing generator ``bit`` (an odd derivation)."""
    has = (a.masks & bit) != 0
    masks = a.masks[has]
    sign = np.where(_popcount(masks & (bit - 1)) & 1, -1.0, 1.0)
    return Multivector(a.gens, a.order, masks & ~bit, a.coeffs[has] * sign[:, None, None],
                       prune=False)


def left_generator(a: Multivector, bit: int, coeffs: np.ndarray | None = None) -> Multivector:
    """gen ^ a for a single generator, optionally with replacement coefficients."""
    c = a.coeffs if coeffs is None else coeffs
    free = (a.masks & bit) == 0
    masks = a.masks[free]
    sign = np.where(_popcount(masks & (bit - 1)) & 1, -1.0, 1.0)
    return _combine(a.gens, a.order if coeffs is None else a.order, masks | bit,
                    c[free] * sign[:, None, None])


def mv_allclose_residual(a: Multivector, b: Multivector, order: int | None = None) -> float:
    """max |a - b| over coefficients up to ``order`` (default: common order)."""
    d = a - b
    if order is not None:
        d = d.truncate(min(order, d.order))
    return d.max_abs()
