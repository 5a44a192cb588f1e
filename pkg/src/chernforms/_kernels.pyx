# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled wedge-product kernel for jet-valued multivectors."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport int64_t, uint64_t

cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil

cnp.import_array()


cdef inline int _swap_parity(uint64_t a, uint64_t b) nogil:
    cdef int s = 0
    cdef int y
    while b:
        y = __builtin_popcountll((b & (~b + 1)) - 1)
        s += __builtin_popcountll(a >> (y + 1))
        b &= b - 1
    return s & 1


def wedge_terms(const int64_t[::1] ma, const double complex[:, :, ::1] ca,
                const int64_t[::1] mb, const double complex[:, :, ::1] cb,
                const int64_t[::1] pi, const int64_t[::1] pj, const int64_t[::1] pk,
                int nout, int nbits):
    """Wedge of two term lists; returns (sorted masks, coefficients)."""
    cdef Py_ssize_t na = ma.shape[0], nb = mb.shape[0]
    cdef Py_ssize_t B = ca.shape[2], T = pi.shape[0]
    cdef Py_ssize_t p, q, t, x, r, nres = 0
    cdef int64_t m
    cdef double sgn
    cdef double complex av
    lookup_arr = np.full(1 << nbits, -1, dtype=np.int64)
    cdef int64_t[::1] lookup = lookup_arr
    with nogil:
        for p in range(na):
            for q in range(nb):
                if ma[p] & mb[q]:
                    continue
                m = ma[p] | mb[q]
                if lookup[m] < 0:
                    lookup[m] = 0
                    nres += 1
    masks_arr = np.empty(nres, dtype=np.int64)
    cdef int64_t[::1] masks = masks_arr
    r = 0
    for m in range(1 << nbits):
        if lookup[m] >= 0:
            lookup[m] = r
            masks[r] = m
            r += 1
    out_arr = np.zeros((nres, nout, B), dtype=np.complex128)
    cdef double complex[:, :, ::1] out = out_arr
    cdef Py_ssize_t i_, j_, k_
    with nogil:
        for p in range(na):
            for q in range(nb):
                if ma[p] & mb[q]:
                    continue
                r = lookup[ma[p] | mb[q]]
                sgn = -1.0 if _swap_parity(<uint64_t>ma[p], <uint64_t>mb[q]) else 1.0
                for t in range(T):
                    i_ = pi[t]
                    j_ = pj[t]
                    k_ = pk[t]
                    for x in range(B):
                        av = ca[p, i_, x]
                        if av == 0:
                            continue
                        out[r, k_, x] = out[r, k_, x] + sgn * av * cb[q, j_, x]
    return masks_arr, out_arr
