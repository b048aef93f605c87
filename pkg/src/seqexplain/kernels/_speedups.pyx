# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled batch predicate evaluation.

Semantics must match ``predicates.eval_predicate`` exactly; the parity test
in tests/test_kernels.py compares the two on random corpora.
"""

import numpy as np

from libc.math cimport fabs

cdef enum:
    K_POS = 0
    K_T1D = 1
    K_T2D = 2

cdef enum:
    OP_EQ = 0
    OP_GT = 1
    OP_LT = 2


cdef inline bint _vcmp(double v, signed char op, double c, double tol) nogil:
    if op == OP_EQ:
        return fabs(v - c) <= tol
    if op == OP_GT:
        return v > c
    return v < c


def featurize_tokens(int[:, ::1] ids, int[::1] lengths,
                     signed char[::1] kind, signed char[::1] op1, signed char[::1] op2,
                     int[::1] jd, int[::1] dd, signed char[::1] bound,
                     int[::1] c1, int[::1] c2):
    cdef Py_ssize_t n = ids.shape[0]
    cdef Py_ssize_t m = kind.shape[0]
    out = np.zeros((n, m), dtype=np.uint8)
    cdef unsigned char[:, ::1] o = out
    cdef Py_ssize_t s, p
    cdef int L, j, k, lo, hi, d
    cdef bint hit
    with nogil:
        for s in range(n):
            L = lengths[s]
            for p in range(m):
                hit = 0
                if kind[p] == K_POS:
                    j = jd[p]
                    hit = j <= L and ids[s, j - 1] == c1[p]
                elif kind[p] == K_T1D:
                    d = dd[p]
                    if bound[p] == 0:  # atleast: j in d..L
                        lo = d
                        hi = L
                    else:               # atmost: j in 1..min(d, L)
                        lo = 1
                        hi = d if d < L else L
                    for j in range(lo, hi + 1):
                        if ids[s, j - 1] == c1[p]:
                            hit = 1
                            break
                else:
                    d = dd[p]
                    for j in range(1, L + 1):
                        if ids[s, j - 1] != c1[p]:
                            continue
                        lo = j + d
                        if lo < 1:
                            lo = 1
                        for k in range(lo, L + 1):
                            if k != j and ids[s, k - 1] == c2[p]:
                                hit = 1
                                break
                        if hit:
                            break
                o[s, p] = hit
    return out


def featurize_values(double[:, ::1] vals, int[::1] lengths,
                     signed char[::1] kind, signed char[::1] op1, signed char[::1] op2,
                     int[::1] jd, int[::1] dd, signed char[::1] bound,
                     double[::1] c1, double[::1] c2, double[::1] tol):
    cdef Py_ssize_t n = vals.shape[0]
    cdef Py_ssize_t m = kind.shape[0]
    out = np.zeros((n, m), dtype=np.uint8)
    cdef unsigned char[:, ::1] o = out
    cdef Py_ssize_t s, p
    cdef int L, j, k, lo, hi, d
    cdef bint hit
    with nogil:
        for s in range(n):
            L = lengths[s]
            for p in range(m):
                hit = 0
                if kind[p] == K_POS:
                    j = jd[p]
                    hit = j <= L and _vcmp(vals[s, j - 1], op1[p], c1[p], tol[p])
                elif kind[p] == K_T1D:
                    d = dd[p]
                    if bound[p] == 0:
                        lo = d
                        hi = L
                    else:
                        lo = 1
                        hi = d if d < L else L
                    for j in range(lo, hi + 1):
                        if _vcmp(vals[s, j - 1], op1[p], c1[p], tol[p]):
                            hit = 1
                            break
                else:
                    d = dd[p]
                    for j in range(1, L + 1):
                        if not _vcmp(vals[s, j - 1], op1[p], c1[p], tol[p]):
                            continue
                        lo = j + d
                        if lo < 1:
                            lo = 1
                        for k in range(lo, L + 1):
                            if k != j and _vcmp(vals[s, k - 1], op2[p], c2[p], tol[p]):
                                hit = 1
                                break
                        if hit:
                            break
                o[s, p] = hit
    return out
