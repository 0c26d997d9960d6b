# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels.

Same contracts as `_numpy`; see that module for documentation. Loops are
single-threaded on purpose: sampler determinism must not depend on the
thread count.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, exp, log

cnp.import_array()

cdef double LOG_2PI = 1.8378770664093453


def gmm_score(double[:, ::1] x, double[:, ::1] means, double[::1] log_w,
              double scale, double var):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t d = x.shape[1]
    cdef Py_ssize_t K = means.shape[0]
    out_arr = np.empty((n, d), dtype=np.float64)
    logits_arr = np.empty(K, dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[::1] logits = logits_arr
    cdef Py_ssize_t i, k, j
    cdef double sq, diff, hi, tot, r

    for i in range(n):
        hi = -INFINITY
        for k in range(K):
            sq = 0.0
            for j in range(d):
                diff = x[i, j] - scale * means[k, j]
                sq += diff * diff
            logits[k] = log_w[k] - 0.5 * sq / var
            if logits[k] > hi:
                hi = logits[k]
        tot = 0.0
        for k in range(K):
            logits[k] = exp(logits[k] - hi)
            tot += logits[k]
        for j in range(d):
            out[i, j] = 0.0
        for k in range(K):
            r = logits[k] / tot
            for j in range(d):
                out[i, j] += r * means[k, j]
        for j in range(d):
            out[i, j] = (scale * out[i, j] - x[i, j]) / var
    return out_arr


def gmm_logpdf(double[:, ::1] x, double[:, ::1] means, double[::1] log_w,
               double scale, double var):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t d = x.shape[1]
    cdef Py_ssize_t K = means.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    logits_arr = np.empty(K, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double[::1] logits = logits_arr
    cdef Py_ssize_t i, k, j
    cdef double sq, diff, hi, tot
    cdef double const = -0.5 * d * (LOG_2PI + log(var))

    for i in range(n):
        hi = -INFINITY
        for k in range(K):
            sq = 0.0
            for j in range(d):
                diff = x[i, j] - scale * means[k, j]
                sq += diff * diff
            logits[k] = log_w[k] - 0.5 * sq / var
            if logits[k] > hi:
                hi = logits[k]
        tot = 0.0
        for k in range(K):
            tot += exp(logits[k] - hi)
        out[i] = hi + log(tot) + const
    return out_arr


def diag_logpdf(double[:, ::1] x, double[:, ::1] mean, double[::1] var):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t d = x.shape[1]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double acc, r
    cdef bint dirac_ok

    for i in range(n):
        acc = 0.0
        dirac_ok = True
        for j in range(d):
            r = x[i, j] - mean[i, j]
            if var[j] > 0.0:
                acc += r * r / var[j] + log(var[j]) + LOG_2PI
            elif r != 0.0:
                dirac_ok = False
        out[i] = -0.5 * acc if dirac_ok else -INFINITY
    return out_arr


def w2sq_1d(double[::1] a, double[::1] b):
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t m = b.shape[0]
    cdef Py_ssize_t i, ia, ib
    cdef double acc = 0.0, d, left, right, qa, qb

    if n == m:
        for i in range(n):
            d = a[i] - b[i]
            acc += d * d
        return acc / n

    # merge the two quantile grids; on each merged cell both quantile
    # functions are constant
    ia = 0
    ib = 0
    left = 0.0
    while ia < n and ib < m:
        qa = (<double> (ia + 1)) / n
        qb = (<double> (ib + 1)) / m
        right = qa if qa < qb else qb
        d = a[ia] - b[ib]
        acc += (right - left) * d * d
        if qa <= right:
            ia += 1
        if qb <= right:
            ib += 1
        left = right
    return acc
