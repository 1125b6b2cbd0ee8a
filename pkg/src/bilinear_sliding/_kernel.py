"""Compiled sliding kernel for variational inequalities with affine components.

Every ``grad p_i(z) = A_i z - c_i`` and ``Q_i(z) = S_i z`` is materialised as
a dense matrix; the recursion is unrolled into an explicit level stack.  The
arithmetic mirrors the reference implementation in ``sliding._run_python``
step for step, and the test-suite checks both agree.
"""

import numpy as np
import numba

from .sliding import _ALPHA, _affine_form_p, _affine_form_q
from .vi import PBall

_BEGIN = 0
_FINISH = 1


@numba.njit(cache=True)
def _sliding_affine(A, c, S, q_nonzero, L, M, T, alphas, p_diag, p_inv, z_in,
                    ball, center, radius):
    n = T.shape[0]
    d = z_in.shape[0]
    z = np.empty((n, d))
    zbar = np.empty((n, d))
    for k in range(n):
        z[k] = z_in
    coeff = np.ones(n + 1)
    scale = np.ones(n + 1)
    offset = np.zeros((n + 1, d))
    lprod = np.ones(n + 1)
    mprod = np.ones(n + 1)
    sum_h = np.zeros(n + 1)
    sum_hc = np.zeros((n + 1, d))
    sum_lin = np.zeros((n + 1, d))
    H = np.zeros(n)
    qz = np.zeros((n, d))
    t = np.zeros(n, dtype=np.int64)
    gcnt = np.zeros(n, dtype=np.int64)
    qcnt = np.zeros(n, dtype=np.int64)
    alpha_last = np.empty(n)
    for k in range(n):
        alpha_last[k] = alphas[T[k] - 1]

    res = np.empty(d)
    k = 0
    zbar[0] = z[0]
    mode = _BEGIN
    while True:
        if mode == _BEGIN:
            a = alphas[t[k]]
            coeff[k + 1] = coeff[k] * a
            scale[k + 1] = scale[k] / a
            offset[k + 1] = offset[k] + (coeff[k] * (1.0 - a)) * zbar[k]
            lprod[k + 1] = lprod[k] * a
            mprod[k + 1] = mprod[k] * a / alpha_last[k]
            H[k] = L[k] * lprod[k + 1] + M[k] * mprod[k + 1]
            point = coeff[k + 1] * z[k] + offset[k + 1]
            delta = (scale[k + 1] * coeff[k + 1]) * (A[k] @ point - c[k])
            gcnt[k] += 1
            if q_nonzero[k]:
                qz[k] = S[k] @ z[k]
                qcnt[k] += 1
                delta = delta + qz[k]
            sum_h[k + 1] = sum_h[k] + H[k]
            sum_hc[k + 1] = sum_hc[k] + H[k] * z[k]
            sum_lin[k + 1] = sum_lin[k] + delta
            if k + 1 == n:
                res = (sum_hc[n] - p_inv * sum_lin[n]) / sum_h[n]
                if ball:
                    diff = res - center
                    r = np.sqrt(np.sum(p_diag * diff * diff))
                    if r > radius:
                        res = center + (radius / r) * diff
                mode = _FINISH
            else:
                k += 1
                zbar[k] = z[k]
                t[k] = 0
        else:
            a = alphas[t[k]]
            zbar[k] = a * res + (1.0 - a) * zbar[k]
            if q_nonzero[k]:
                z[k] = res + (qz[k] - S[k] @ res) * p_inv / H[k]
                qcnt[k] += 1
            else:
                z[k] = res
            t[k] += 1
            if t[k] >= T[k]:
                res = zbar[k].copy()
                if k == 0:
                    return res, gcnt, qcnt
                k -= 1
            else:
                mode = _BEGIN


def run_affine(vi, schedule, z_in):
    n = vi.n
    d = vi.dim
    comps = [vi.components[j] for j in schedule.order]
    A = np.empty((n, d, d))
    c = np.empty((n, d))
    S = np.empty((n, d, d))
    q_nonzero = np.empty(n, dtype=np.bool_)
    for k, comp in enumerate(comps):
        A[k], c[k] = _affine_form_p(comp.p)
        S[k] = _affine_form_q(comp.Q)
        q_nonzero[k] = not comp.Q.is_zero
    L = np.array([comp.L for comp in comps])
    M = np.array([comp.M for comp in comps])
    T = np.array(schedule.T, dtype=np.int64)
    alphas = _ALPHA.table(int(T.max()))
    con = vi.constraint
    ball = isinstance(con, PBall)
    center = con.center if ball else np.zeros(d)
    radius = con.radius if ball else 0.0
    return _sliding_affine(A, c, S, q_nonzero, L, M, T, alphas, vi.P.diagonal.copy(), vi.P.inverse.copy(),
                           np.ascontiguousarray(z_in, dtype=float), ball, center, radius)
