# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled clustering kernels.

Same algorithms and floating-point operation order as ``_pylinkage``; the
two backends must agree bit for bit.
"""
import numpy as np

cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport sqrt, INFINITY

cnp.import_array()

BACKEND = "cython"


def cosine_distance_matrix(X, int threads=1):
    cdef double[:, ::1] x = np.ascontiguousarray(X, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0], p = x.shape[1]
    out = np.zeros((n, n), dtype=np.float64)
    cdef double[:, ::1] D = out
    cdef double[::1] norm = np.zeros(n, dtype=np.float64)
    cdef Py_ssize_t i, j, q
    cdef double s, d
    for i in range(n):
        s = 0.0
        for q in range(p):
            s = s + x[i, q] * x[i, q]
        norm[i] = sqrt(s)
    if threads < 1:
        threads = 1
    # each cell is written by exactly one iteration: result is thread-count independent
    for i in prange(n, nogil=True, num_threads=threads, schedule="static"):
        for j in range(n):
            if i == j:
                continue
            s = 0.0
            for q in range(p):
                s = s + x[i, q] * x[j, q]
            d = 1.0 - s / (norm[i] * norm[j])
            if d < 0.0:
                d = 0.0
            elif d > 2.0:
                d = 2.0
            D[i, j] = d
    return out


cdef inline bint _key_less(double d1, long lo1, long hi1, double d2, long lo2, long hi2) nogil:
    if d1 != d2:
        return d1 < d2
    if lo1 != lo2:
        return lo1 < lo2
    return hi1 < hi2


cdef void _row_nn(double[:, ::1] D, Py_ssize_t i, unsigned char[::1] active,
                  long[::1] cid, long[::1] nn, double[::1] nnd) nogil:
    cdef Py_ssize_t j, n = D.shape[0]
    cdef long best = -1, blo = 0, bhi = 0, lo, hi
    cdef double bd = INFINITY, d
    for j in range(n):
        if j == i or not active[j]:
            continue
        d = D[i, j]
        if d == INFINITY:
            continue
        if cid[i] < cid[j]:
            lo = cid[i]
            hi = cid[j]
        else:
            lo = cid[j]
            hi = cid[i]
        if best < 0 or _key_less(d, lo, hi, bd, blo, bhi):
            best = j
            bd = d
            blo = lo
            bhi = hi
    nn[i] = best
    nnd[i] = bd


def average_linkage(D_in):
    Dn = np.array(D_in, dtype=np.float64, order="C", copy=True)
    cdef Py_ssize_t n = Dn.shape[0]
    Zn = np.zeros((max(n - 1, 0), 4), dtype=np.float64)
    if n < 2:
        return Zn
    np.fill_diagonal(Dn, np.inf)
    cdef double[:, ::1] D = Dn
    cdef double[:, ::1] Z = Zn
    cdef unsigned char[::1] active = np.ones(n, dtype=np.uint8)
    cdef long[::1] cid = np.arange(n, dtype=np.int_)
    cdef double[::1] size = np.ones(n, dtype=np.float64)
    cdef long[::1] nn = np.empty(n, dtype=np.int_)
    cdef double[::1] nnd = np.empty(n, dtype=np.float64)
    cdef Py_ssize_t i, j, k, a, b, step, bi
    cdef long lo, hi, blo, bhi
    cdef double bd, d, sa, sb, merged

    with nogil:
        for i in range(n):
            _row_nn(D, i, active, cid, nn, nnd)

        for step in range(n - 1):
            bi = -1
            bd = INFINITY
            blo = 0
            bhi = 0
            for i in range(n):
                if not active[i] or nn[i] < 0:
                    continue
                j = nn[i]
                if cid[i] < cid[j]:
                    lo = cid[i]
                    hi = cid[j]
                else:
                    lo = cid[j]
                    hi = cid[i]
                if bi < 0 or _key_less(nnd[i], lo, hi, bd, blo, bhi):
                    bi = i
                    bd = nnd[i]
                    blo = lo
                    bhi = hi
            i = bi
            j = nn[bi]
            if i < j:
                a = i
                b = j
            else:
                a = j
                b = i
            sa = size[a]
            sb = size[b]
            Z[step, 0] = blo
            Z[step, 1] = bhi
            Z[step, 2] = bd
            Z[step, 3] = sa + sb

            active[b] = 0
            for k in range(n):
                if active[k] and k != a:
                    merged = (sa * D[a, k] + sb * D[b, k]) / (sa + sb)
                    D[a, k] = merged
                    D[k, a] = merged
            # slot b is dead: every reader checks active[] first
            cid[a] = n + step
            size[a] = sa + sb

            for k in range(n):
                if not active[k] or k == a:
                    continue
                if nn[k] == a or nn[k] == b:
                    _row_nn(D, k, active, cid, nn, nnd)
                elif D[k, a] < nnd[k]:
                    nn[k] = a
                    nnd[k] = D[k, a]
            _row_nn(D, a, active, cid, nn, nnd)
    return Zn
