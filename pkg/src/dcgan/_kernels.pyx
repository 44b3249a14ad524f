# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: batch path signatures and the opinion-model drift."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, fabs
from libc.stdlib cimport malloc, free

cnp.import_array()

BACKEND = "cython"


def level_offsets(int dim, int depth):
    offsets = [0]
    cdef long size = 1, start = 0
    for _ in range(depth + 1):
        start += size
        offsets.append(start)
        size *= dim
    return offsets


def batch_signature(increments, int depth):
    inc = np.ascontiguousarray(increments, dtype=np.float64)
    B, J, D = inc.shape
    out_arr = np.zeros((B, level_offsets(D, depth)[depth + 1]), dtype=np.float64)
    out_arr[:, 0] = 1.0
    _run(inc, depth, out_arr, np.empty((1, 1, 1)), False)
    return out_arr


def stream_signature(increments, int depth):
    inc = np.ascontiguousarray(increments, dtype=np.float64)
    B, J, D = inc.shape
    total = level_offsets(D, depth)[depth + 1]
    sig_arr = np.zeros((B, total), dtype=np.float64)
    sig_arr[:, 0] = 1.0
    out_arr = np.empty((B, J, total), dtype=np.float64)
    _run(inc, depth, sig_arr, out_arr, True)
    return out_arr


cdef int _run(double[:, :, ::1] inc, int depth, double[:, ::1] sig, double[:, :, ::1] st, bint keep) except -1:
    cdef Py_ssize_t B = inc.shape[0], J = inc.shape[1], D = inc.shape[2]
    offs = level_offsets(D, depth)
    cdef Py_ssize_t total = offs[depth + 1]
    cdef Py_ssize_t top = offs[depth + 1] - offs[depth]
    cdef cnp.int64_t[::1] off_arr = np.asarray(offs, dtype=np.int64)
    cdef double *buf = <double *> malloc(top * sizeof(double))
    cdef double *tmp = <double *> malloc(top * sizeof(double))
    cdef double *swap
    cdef Py_ssize_t b, j, k, i, a, c, blen, oi
    cdef double v, denom
    if buf == NULL or tmp == NULL:
        free(buf)
        free(tmp)
        raise MemoryError()
    try:
        with nogil:
            for b in range(B):
                for j in range(J):
                    for k in range(depth, 0, -1):
                        for a in range(D):
                            buf[a] = inc[b, j, a] / k
                        blen = D
                        for i in range(1, k):
                            oi = off_arr[i]
                            denom = <double> (k - i)
                            for a in range(blen):
                                v = buf[a] + sig[b, oi + a]
                                for c in range(D):
                                    tmp[a * D + c] = v * inc[b, j, c] / denom
                            swap = buf
                            buf = tmp
                            tmp = swap
                            blen = blen * D
                        oi = off_arr[k]
                        for a in range(blen):
                            sig[b, oi + a] += buf[a]
                    if keep:
                        for a in range(total):
                            st[b, j, a] = sig[b, a]
    finally:
        free(buf)
        free(tmp)
    return 0


def opinion_drift(y, double theta1, double theta2):
    cdef double[::1] ys = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t n = ys.shape[0], i, j
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double acc, d, r, u, phi
    with nogil:
        for i in range(n):
            acc = 0.0
            for j in range(n):
                d = ys[i] - ys[j]
                r = fabs(d)
                u = (r - theta2) * (r - theta2)
                if r > 0.0 and u < 1.0:
                    phi = theta1 * exp(-0.01 / (1.0 - u))
                    acc = acc + phi * d
            out[i] = -acc / n
    return out_arr
