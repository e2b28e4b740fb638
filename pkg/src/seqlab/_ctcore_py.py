"""Pure-numpy fallback for the dynamic-programming loss kernels.

Same contracts as the compiled `seqlab._ctcore` extension; selected by
`seqlab.backend` when the extension is unavailable or when the
SEQLAB_PURE_PYTHON environment variable is set.

Both kernels work in log space with a large negative sentinel instead of
-inf so that arithmetic never produces NaN.
"""

from __future__ import annotations

import math

import numpy as np

from .common import NEG_INF, PROB_FLOOR

BACKEND_NAME = "python"


def ctc_forward_backward(probs: np.ndarray, ext: np.ndarray):
    """CTC negative log-likelihood and gradient w.r.t. the probabilities.

    probs: (T, K) per-frame symbol probabilities, column 0 = blank.
    ext:   blank-interleaved extended target, length 2*S + 1.

    Returns (loss, grad).  If the target has zero total probability the loss
    is +inf and the gradient is all zeros.
    """
    probs = np.asarray(probs, dtype=np.float64)
    ext = np.asarray(ext, dtype=np.int64)
    T = probs.shape[0]
    M = ext.shape[0]
    lp = np.log(np.maximum(probs, PROB_FLOOR))
    lab = lp[:, ext]  # (T, M) log-prob of each extended state per frame

    skip = np.zeros(M, dtype=bool)
    if M > 2:
        skip[2:] = (ext[2:] != 0) & (ext[2:] != ext[:-2])

    la = np.full((T, M), NEG_INF)
    la[0, 0] = lab[0, 0]
    if M > 1:
        la[0, 1] = lab[0, 1]
    for t in range(1, T):
        prev = la[t - 1]
        acc = prev.copy()
        acc[1:] = np.logaddexp(acc[1:], prev[:-1])
        if skip.any():
            acc[skip] = np.logaddexp(acc[skip], prev[:-2][skip[2:]])
        la[t] = acc + lab[t]

    log_p = la[T - 1, M - 1]
    if M > 1:
        log_p = np.logaddexp(log_p, la[T - 1, M - 2])
    if log_p < NEG_INF / 2:
        return math.inf, np.zeros_like(probs)

    lb = np.full((T, M), NEG_INF)
    lb[T - 1, M - 1] = lab[T - 1, M - 1]
    if M > 1:
        lb[T - 1, M - 2] = lab[T - 1, M - 2]
    for t in range(T - 2, -1, -1):
        nxt = lb[t + 1]
        acc = nxt.copy()
        acc[:-1] = np.logaddexp(acc[:-1], nxt[1:])
        if skip.any():
            acc[:-2][skip[2:]] = np.logaddexp(acc[:-2][skip[2:]], nxt[skip])
        lb[t] = acc + lab[t]

    # alpha*beta counts the frame-t emission twice; divide it out once, and
    # once more for the d/dy factor
    gamma = la + lb - lab
    grad = np.zeros_like(probs)
    with np.errstate(under="ignore"):
        for k in np.unique(ext):
            cols = gamma[:, ext == k]
            hi = cols.max(axis=1)
            mask = hi > NEG_INF / 2
            if not mask.any():
                continue
            g = hi + np.log(np.exp(cols - hi[:, None]).sum(axis=1))
            grad[mask, k] = -np.exp(g[mask] - log_p - lp[mask, k])
    return float(-log_p), grad


def _ctl_frame_tables(z: np.ndarray):
    """Per-frame log quantities for the CTL recursion.

    Returns (leps, lp_all, loo, extras) where leps[t] = log eps_t,
    lp_all[t, l] = log p_t(l), loo[t, l] = log prod_{l' != l} (1 - z[t, l']).
    `extras` carries intermediates reused by the gradient.
    """
    zc = np.clip(np.asarray(z, dtype=np.float64), 0.0, 1.0)
    is_one = zc >= 1.0
    # log(1 - z) with exact-one entries excluded (they are tracked by count)
    l1mz = np.zeros_like(zc)
    fin = ~is_one
    l1mz[fin] = np.log1p(-zc[fin])
    fin_sum = l1mz.sum(axis=1)
    n1 = is_one.sum(axis=1)

    leps = np.where(n1 == 0, fin_sum, NEG_INF)
    loo = np.full_like(zc, NEG_INF)
    m0 = n1 == 0
    loo[m0] = fin_sum[m0, None] - l1mz[m0]
    m1 = n1 == 1
    if m1.any():
        loo[m1] = np.where(is_one[m1], fin_sum[m1, None], NEG_INF)
    lz = np.where(zc > 0, np.log(np.maximum(zc, PROB_FLOOR)), NEG_INF)
    lp_all = np.where(zc > 0, lz + loo, NEG_INF)
    return leps, lp_all, loo, (zc, is_one, l1mz, fin_sum, n1)


def ctl_forward_backward(z: np.ndarray, sym: np.ndarray):
    """CTL negative log-likelihood and gradient w.r.t. the boundary
    probabilities z.

    z:   (T, L) boundary probabilities in [0, 1].
    sym: target as column indices into z, length S <= T.

    The forward recursion lets every frame either stay silent (probability
    eps_t) or emit the next target symbol (probability p_t(l)).
    """
    z = np.asarray(z, dtype=np.float64)
    sym = np.asarray(sym, dtype=np.int64)
    T, L = z.shape
    S = sym.shape[0]
    leps, lp_all, loo, (zc, is_one, l1mz, fin_sum, n1) = _ctl_frame_tables(z)
    lpsym = lp_all[:, sym] if S else np.zeros((T, 0))

    A = np.full((T + 1, S + 1), NEG_INF)
    A[0, 0] = 0.0
    for t in range(1, T + 1):
        prev = A[t - 1]
        cur = leps[t - 1] + prev
        if S:
            cur[1:] = np.logaddexp(cur[1:], lpsym[t - 1] + prev[:-1])
        A[t] = cur

    log_p = A[T, S]
    if log_p < NEG_INF / 2:
        return math.inf, np.zeros_like(z)

    B = np.full((T + 1, S + 1), NEG_INF)
    B[T, S] = 0.0
    for t in range(T, 0, -1):
        nxt = B[t]
        cur = leps[t - 1] + nxt
        if S:
            cur[:-1] = np.logaddexp(cur[:-1], lpsym[t - 1] + nxt[1:])
        B[t - 1] = cur

    with np.errstate(under="ignore", over="ignore"):
        # (1/P) dP/deps_t and (1/P) dP/dp_t(l_s)
        g_eps = np.exp(A[:-1] + B[1:] - log_p).sum(axis=1)  # (T,)
        gp = np.exp(A[:-1, :-1] + B[1:, 1:] - log_p) if S else np.zeros((T, 0))

        eloo = np.exp(np.maximum(loo, -745.0))
        is_one_i = is_one.astype(np.int64)
        grad = g_eps[:, None] * eloo
        for s in range(S):
            l = int(sym[s])
            w = gp[:, s]
            grad[:, l] -= w * eloo[:, l]
            # cross terms: dp(l)/dz_m = -z_l * prod_{l' not in {l,m}} (1 - z_l')
            rest_ones = (n1 - is_one_i[:, l])[:, None] - is_one_i
            fin2 = fin_sum[:, None] - l1mz[:, [l]] - l1mz
            term = np.where(rest_ones == 0, np.exp(np.minimum(fin2, 0.0)), 0.0)
            term *= zc[:, [l]]
            term[:, l] = 0.0
            grad += w[:, None] * term
    return float(-log_p), grad
