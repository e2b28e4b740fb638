# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled dynamic-programming loss kernels.

Mirrors `seqlab._ctcore_py` exactly (same log-space recursions, same
sentinel); the parity tests compare both backends on random instances.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, log1p, INFINITY

cnp.import_array()

BACKEND_NAME = "cython"

cdef double NEG_INF = -1e30
cdef double PROB_FLOOR = 1e-300


cdef inline double ladd(double a, double b) nogil:
    cdef double t
    if a < b:
        t = a; a = b; b = t
    return a + log1p(exp(b - a))


def ctc_forward_backward(probs, ext):
    """CTC negative log-likelihood and gradient w.r.t. the probabilities.

    probs: (T, K) per-frame symbol probabilities, column 0 = blank.
    ext:   blank-interleaved extended target, length 2*S + 1.
    """
    cdef cnp.ndarray[cnp.float64_t, ndim=2] p = \
        np.ascontiguousarray(probs, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] e = \
        np.ascontiguousarray(ext, dtype=np.int64)
    cdef Py_ssize_t T = p.shape[0], K = p.shape[1], M = e.shape[0]
    cdef Py_ssize_t t, s, k
    cdef double acc, log_p

    cdef cnp.ndarray[cnp.float64_t, ndim=2] lp = \
        np.log(np.maximum(p, PROB_FLOOR))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] la = np.full((T, M), NEG_INF)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] lb = np.full((T, M), NEG_INF)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] skip = np.zeros(M, dtype=np.uint8)

    for s in range(2, M):
        if e[s] != 0 and e[s] != e[s - 2]:
            skip[s] = 1

    la[0, 0] = lp[0, e[0]]
    if M > 1:
        la[0, 1] = lp[0, e[1]]
    for t in range(1, T):
        for s in range(M):
            acc = la[t - 1, s]
            if s >= 1:
                acc = ladd(acc, la[t - 1, s - 1])
            if s >= 2 and skip[s]:
                acc = ladd(acc, la[t - 1, s - 2])
            la[t, s] = acc + lp[t, e[s]]

    log_p = la[T - 1, M - 1]
    if M > 1:
        log_p = ladd(log_p, la[T - 1, M - 2])
    if log_p < NEG_INF / 2:
        return float("inf"), np.zeros_like(p)

    lb[T - 1, M - 1] = lp[T - 1, e[M - 1]]
    if M > 1:
        lb[T - 1, M - 2] = lp[T - 1, e[M - 2]]
    for t in range(T - 2, -1, -1):
        for s in range(M):
            acc = lb[t + 1, s]
            if s + 1 < M:
                acc = ladd(acc, lb[t + 1, s + 1])
            if s + 2 < M and skip[s + 2]:
                acc = ladd(acc, lb[t + 1, s + 2])
            lb[t, s] = acc + lp[t, e[s]]

    cdef cnp.ndarray[cnp.float64_t, ndim=2] g = np.full((T, K), NEG_INF)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] grad = np.zeros((T, K))
    cdef double v
    for t in range(T):
        for s in range(M):
            k = e[s]
            v = la[t, s] + lb[t, s] - lp[t, e[s]]
            g[t, k] = ladd(g[t, k], v)
        for k in range(K):
            if g[t, k] > NEG_INF / 2:
                v = g[t, k] - log_p - lp[t, k]
                grad[t, k] = -exp(v) if v < 700.0 else -INFINITY
    return float(-log_p), grad


def ctl_forward_backward(z, sym):
    """CTL negative log-likelihood and gradient w.r.t. the boundary
    probabilities z (T x L); sym holds target column indices."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] zc = \
        np.clip(np.asarray(z, dtype=np.float64), 0.0, 1.0)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] sy = \
        np.ascontiguousarray(sym, dtype=np.int64)
    cdef Py_ssize_t T = zc.shape[0], L = zc.shape[1], S = sy.shape[0]
    cdef Py_ssize_t t, s, l, m, i
    cdef double acc, log_p, w, fin2, v

    cdef cnp.ndarray[cnp.float64_t, ndim=2] l1mz = np.zeros((T, L))
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] is_one = np.zeros((T, L), dtype=np.uint8)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] fin_sum = np.zeros(T)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] n1 = np.zeros(T, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] leps = np.zeros(T)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] loo = np.full((T, L), NEG_INF)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] lp_all = np.full((T, L), NEG_INF)

    for t in range(T):
        for l in range(L):
            if zc[t, l] >= 1.0:
                is_one[t, l] = 1
                n1[t] += 1
            else:
                l1mz[t, l] = log1p(-zc[t, l])
                fin_sum[t] += l1mz[t, l]
        leps[t] = fin_sum[t] if n1[t] == 0 else NEG_INF
        for l in range(L):
            if n1[t] == 0:
                loo[t, l] = fin_sum[t] - l1mz[t, l]
            elif n1[t] == 1 and is_one[t, l]:
                loo[t, l] = fin_sum[t]
            if zc[t, l] > 0.0:
                lp_all[t, l] = log(max(zc[t, l], PROB_FLOOR)) + loo[t, l]

    cdef cnp.ndarray[cnp.float64_t, ndim=2] A = np.full((T + 1, S + 1), NEG_INF)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] B = np.full((T + 1, S + 1), NEG_INF)
    A[0, 0] = 0.0
    for t in range(1, T + 1):
        for s in range(S + 1):
            acc = leps[t - 1] + A[t - 1, s]
            if s >= 1:
                acc = ladd(acc, lp_all[t - 1, sy[s - 1]] + A[t - 1, s - 1])
            A[t, s] = acc

    log_p = A[T, S]
    if log_p < NEG_INF / 2:
        return float("inf"), np.zeros_like(zc)

    B[T, S] = 0.0
    for t in range(T, 0, -1):
        for s in range(S + 1):
            acc = leps[t - 1] + B[t, s]
            if s < S:
                acc = ladd(acc, lp_all[t - 1, sy[s]] + B[t, s + 1])
            B[t - 1, s] = acc

    cdef cnp.ndarray[cnp.float64_t, ndim=1] g_eps = np.zeros(T)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] gp = np.zeros((T, max(S, 1)))
    for t in range(T):
        acc = 0.0
        for s in range(S + 1):
            v = A[t, s] + B[t + 1, s] - log_p
            if v > NEG_INF / 2:
                acc += exp(v) if v < 700.0 else INFINITY
        g_eps[t] = acc
        for s in range(S):
            v = A[t, s] + B[t + 1, s + 1] - log_p
            if v > NEG_INF / 2:
                gp[t, s] = exp(v) if v < 700.0 else INFINITY

    cdef cnp.ndarray[cnp.float64_t, ndim=2] eloo = np.zeros((T, L))
    for t in range(T):
        for l in range(L):
            if loo[t, l] > -745.0:
                eloo[t, l] = exp(loo[t, l])

    cdef cnp.ndarray[cnp.float64_t, ndim=2] grad = np.zeros((T, L))
    cdef cnp.int64_t rest
    for t in range(T):
        for m in range(L):
            grad[t, m] = g_eps[t] * eloo[t, m]
        for s in range(S):
            l = sy[s]
            w = gp[t, s]
            grad[t, l] -= w * eloo[t, l]
            if w == 0.0 or zc[t, l] == 0.0:
                continue
            for m in range(L):
                if m == l:
                    continue
                rest = n1[t] - is_one[t, l] - is_one[t, m]
                if rest != 0:
                    continue
                fin2 = fin_sum[t] - l1mz[t, l] - l1mz[t, m]
                if fin2 > 0.0:
                    fin2 = 0.0
                grad[t, m] += w * zc[t, l] * exp(fin2)
    return float(-log_p), grad
