"""Exterior derivatives and connection operators on jet-valued multivectors."""

from __future__ import annotations

import numpy as np

from .grassmann import Multivector, _combine, interior, wedge
from .jets import InsufficientOrderError, Jet, _table_space

ALEPH = 1j / (2 * np.pi)


def lift(gens, jet: Jet) -> Multivector:
    """A function as a 0-form."""
    return Multivector.from_terms(gens, {0: jet})


def _partial(a: Multivector, offset: int) -> Multivector:
    """Sum over variables v of dvar_v ^ d(a)/d(var v); ``offset`` 0 for z, n for zbar."""
    if a.order < 1:
        raise InsufficientOrderError("jet order exhausted by differentiation")
    n = a.n
    sp = _table_space(2 * n, a.order)
    size = sp.size(a.order - 1)
    masks, coeffs = [], []
    for v in range(n):
        src, dst, fac = sp.derivative_table(offset + v, a.order)
        c = np.zeros((a.nterms, size, a.batch), dtype=complex)
        c[:, dst] = a.coeffs[:, src] * fac[None, :, None]
        bit = 1 << (offset + v)
        free = (a.masks & bit) == 0
        sign = np.where(np.bitwise_count(a.masks[free] & (bit - 1)) & 1, -1.0, 1.0)
        masks.append(a.masks[free] | bit)
        coeffs.append(c[free] * sign[:, None, None])
    return _combine(a.gens, a.order - 1, np.concatenate(masks), np.concatenate(coeffs))


def del_(a: Multivector) -> Multivector:
    """Holomorphic exterior derivative."""
    return _partial(a, 0)


def delbar(a: Multivector) -> Multivector:
    return _partial(a, a.n)


def d(a: Multivector) -> Multivector:
    return del_(a) + delbar(a)


def ddc(a: Multivector) -> Multivector:
    """dd^c = (i/pi) del delbar."""
    return del_(delbar(a)) * (2 * ALEPH)


def dc(a: Multivector) -> Multivector:
    return (delbar(a) - del_(a)) * ALEPH


class ConnectionAction:
    """The odd derivation induced on Lambda(T* + E + E*) by a connection matrix.

    ``theta[j][k]`` is the 1-form with D e_k = sum_j theta[j][k] e_j; the dual
    frame then moves by D e*_k = -sum_j theta[k][j] e*_j.  Forms are inert.
    """

    def __init__(self, gens, theta):
        self.gens = gens
        self.theta = theta
        m = gens.m
        self.images = {}
        for j in range(m):
            img = None
            for i in range(m):
                t = wedge(theta[i][j], Multivector.generator(gens, gens.e(i), theta[i][j].order,
                                                             theta[i][j].batch))
                img = t if img is None else img + t
            self.images[gens.e(j)] = img
        for k in range(m):
            img = None
            for j in range(m):
                t = wedge(theta[k][j], Multivector.generator(gens, gens.estar(j), theta[k][j].order,
                                                             theta[k][j].batch))
                img = -t if img is None else img - t
            self.images[gens.estar(k)] = img

    def __call__(self, a: Multivector) -> Multivector:
        out = Multivector.zero(a.gens, min(a.order, self.order), a.batch)
        for bit, img in self.images.items():
            if not (a.masks & bit).any():
                continue
            out = out + wedge(img, interior(a, bit))
        return out

    @property
    def order(self) -> int:
        return self.theta[0][0].order


def covariant(action: ConnectionAction, a: Multivector) -> Multivector:
    """D = d + theta-action."""
    return d(a) + action(a)


def covariant_10(action: ConnectionAction, a: Multivector) -> Multivector:
    """D' = del + theta-action (the (1,0) part of the Chern connection)."""
    return del_(a) + action(a)
