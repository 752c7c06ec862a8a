# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: l1-ball projection and RIP subset enumeration.

Signatures match ``_kernels_py``; the loops release the GIL so callers may
split subset ranges across threads.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt
from libc.stdlib cimport malloc, free

from ._combinatorics import unrank_combination

cnp.import_array()


def project_l1_ball(b, double tau):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] src = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t n = src.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.zeros(n, dtype=np.float64)
    cdef double total = 0.0, csum = 0.0, theta = 0.0, a
    cdef Py_ssize_t i, rho = 0
    if tau <= 0.0:
        return out
    for i in range(n):
        total += fabs(src[i])
    if total <= tau:
        out[:] = src
        return out
    cdef cnp.ndarray[cnp.intp_t, ndim=1] order = np.argsort(-np.abs(src), kind="stable")
    for i in range(n):
        a = fabs(src[order[i]])
        csum += a
        if a - (csum - tau) / (i + 1) > 0:
            rho = i
            theta = (csum - tau) / (i + 1)
    for i in range(n):
        a = fabs(src[i]) - theta
        if a > 0:
            out[i] = a if src[i] > 0 else -a
    return out


cdef void _jacobi_extremes(double* a, int k, double* lo, double* hi) nogil:
    # cyclic Jacobi on a k x k row-major symmetric buffer (destroyed)
    cdef int sweep, p, q, r
    cdef double off, fro, app, aqq, apq, theta, t, c, s, arp, arq
    for sweep in range(100):
        off = 0.0
        fro = 0.0
        for p in range(k):
            fro += a[p * k + p] * a[p * k + p]
            for q in range(p + 1, k):
                off += a[p * k + q] * a[p * k + q]
        fro += 2.0 * off
        if off <= 1e-30 * fro or off == 0.0:
            break
        for p in range(k - 1):
            for q in range(p + 1, k):
                apq = a[p * k + q]
                if apq == 0.0:
                    continue
                app = a[p * k + p]
                aqq = a[q * k + q]
                theta = (aqq - app) / (2.0 * apq)
                t = 1.0 / (fabs(theta) + sqrt(theta * theta + 1.0))
                if theta < 0:
                    t = -t
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                a[p * k + p] = app - t * apq
                a[q * k + q] = aqq + t * apq
                a[p * k + q] = 0.0
                a[q * k + p] = 0.0
                for r in range(k):
                    if r == p or r == q:
                        continue
                    arp = a[r * k + p]
                    arq = a[r * k + q]
                    a[r * k + p] = c * arp - s * arq
                    a[p * k + r] = a[r * k + p]
                    a[r * k + q] = s * arp + c * arq
                    a[q * k + r] = a[r * k + q]
    for p in range(k):
        if a[p * k + p] < lo[0]:
            lo[0] = a[p * k + p]
        if a[p * k + p] > hi[0]:
            hi[0] = a[p * k + p]


cdef void _fill(const double[:, ::1] g, const Py_ssize_t* idx, int k, double* buf) nogil:
    cdef int i, j
    for i in range(k):
        for j in range(k):
            buf[i * k + j] = g[idx[i], idx[j]]


def rip_range(gram, int k, long long start, long long count):
    cdef const double[:, ::1] g = np.ascontiguousarray(gram, dtype=np.float64)
    cdef Py_ssize_t p = g.shape[0]
    cdef double lo = np.inf, hi = -np.inf
    if count <= 0:
        return lo, hi
    cdef cnp.ndarray[cnp.intp_t, ndim=1] first = np.ascontiguousarray(
        unrank_combination(p, k, start), dtype=np.intp)
    cdef Py_ssize_t* combo = <Py_ssize_t*> malloc(k * sizeof(Py_ssize_t))
    cdef double* buf = <double*> malloc(k * k * sizeof(double))
    cdef long long done
    cdef int i, j
    try:
        for i in range(k):
            combo[i] = first[i]
        with nogil:
            for done in range(count):
                _fill(g, combo, k, buf)
                _jacobi_extremes(buf, k, &lo, &hi)
                i = k - 1
                while i >= 0 and combo[i] == p - k + i:
                    i -= 1
                if i < 0:
                    break
                combo[i] += 1
                for j in range(i + 1, k):
                    combo[j] = combo[j - 1] + 1
    finally:
        free(combo)
        free(buf)
    return float(lo), float(hi)


def rip_subsets(gram, subsets):
    cdef const double[:, ::1] g = np.ascontiguousarray(gram, dtype=np.float64)
    cdef const Py_ssize_t[:, ::1] sub = np.ascontiguousarray(subsets, dtype=np.intp)
    cdef Py_ssize_t m = sub.shape[0], t
    cdef int k = sub.shape[1]
    cdef double lo = np.inf, hi = -np.inf
    if m == 0:
        return lo, hi
    cdef double* buf = <double*> malloc(k * k * sizeof(double))
    try:
        with nogil:
            for t in range(m):
                _fill(g, &sub[t, 0], k, buf)
                _jacobi_extremes(buf, k, &lo, &hi)
    finally:
        free(buf)
    return float(lo), float(hi)
