"""Pure numpy implementation of the wedge-product kernel."""

from __future__ import annotations

import numpy as np

_PAIR_CHUNK = 1 << 21  # complex entries per temporary block


def swap_parity(a: np.ndarray, b: np.ndarray, nbits: int) -> np.ndarray:
    """Parity of the inversions created by concatenating blades ``a`` then ``b``."""
    par = np.zeros(a.shape, dtype=np.int64)
    for y in range(nbits):
        has = (b >> y) & 1
        if not has.any():
            continue
        par ^= has * (np.bitwise_count(a >> (y + 1)).astype(np.int64) & 1)
    return par


def wedge_terms(ma, ca, mb, cb, pi, pj, pk, nout, nbits):
    ia, ib = np.nonzero((ma[:, None] & mb[None, :]) == 0)
    B = ca.shape[2]
    if ia.size == 0:
        return np.empty(0, dtype=np.int64), np.zeros((0, nout, B), dtype=complex)
    sign = 1.0 - 2.0 * swap_parity(ma[ia], mb[ib], nbits)
    rm = ma[ia] | mb[ib]
    order = np.argsort(rm, kind="stable")
    ia, ib, sign, rm = ia[order], ib[order], sign[order], rm[order]
    masks, starts = np.unique(rm, return_index=True)
    T = pi.shape[0]
    scatter = np.zeros((nout, T))
    scatter[pk, np.arange(T)] = 1.0
    out = np.zeros((masks.size, nout, B), dtype=complex)
    group = np.repeat(np.arange(masks.size), np.diff(np.append(starts, rm.size)))
    step = max(1, _PAIR_CHUNK // max(1, T * B))
    for lo in range(0, ia.size, step):
        hi = min(ia.size, lo + step)
        if T == 1:
            prod = ca[ia[lo:hi], pi[0]] * cb[ib[lo:hi], pj[0]]  # (P, B)
            prod = prod[:, None, :]
        else:
            prod = ca[ia[lo:hi]][:, pi, :] * cb[ib[lo:hi]][:, pj, :]  # (P, T, B)
            prod = np.einsum("kt,ptb->pkb", scatter, prod)
        prod *= sign[lo:hi, None, None]
        g = group[lo:hi]
        cuts = np.flatnonzero(np.diff(g)) + 1
        sums = np.add.reduceat(prod, np.concatenate(([0], cuts)), axis=0)
        out[g[np.concatenate(([0], cuts))]] += sums
    return masks.astype(np.int64), out
