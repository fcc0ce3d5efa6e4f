"""Pure-numpy implementations of the hot kernels.

Signatures match :mod:`fracdelay._kernels_numba` exactly; arrays are 1-D
float64.  Loops run over series index / time index only, vectorising
across evaluation points.
"""

import math

import numpy as np

from ._dd import GAMMA_DIRECT_MAX, dd_add, dd_div_d, dd_mul_d


def ml_series(alpha, beta, gam, z, eps_abs, eps_rel, kmax):
    with np.errstate(over="ignore", invalid="ignore"):
        return _ml_series(alpha, beta, gam, z, eps_abs, eps_rel, kmax)


def _ml_series(alpha, beta, gam, z, eps_abs, eps_rel, kmax):
    z = np.ascontiguousarray(z, dtype=np.float64)
    m = z.shape[0]
    val = np.empty(m)
    abs_sum = np.empty(m)
    nterms = np.full(m, -1, dtype=np.int64)

    idx = np.arange(m)
    zz = z.copy()
    ah = np.ones(m)
    al = np.zeros(m)
    sh = np.zeros(m)
    sl = np.zeros(m)
    asum = np.zeros(m)
    small = np.zeros(m, dtype=np.int64)
    for k in range(kmax):
        if idx.shape[0] == 0:
            break
        x = alpha * k + beta
        if x <= GAMMA_DIRECT_MAX:
            th, tl = dd_div_d(ah, al, math.gamma(x))
        else:
            th = ah * math.exp(-math.lgamma(x))
            tl = np.zeros_like(th)
        sh, sl = dd_add(sh, sl, th, tl)
        mag = np.abs(th)
        over = ~(mag < np.inf)
        if over.any():
            val[idx[over]] = np.nan
            abs_sum[idx[over]] = np.inf
            keep = ~over
            idx, zz, ah, al, th, tl = idx[keep], zz[keep], ah[keep], al[keep], th[keep], tl[keep]
            sh, sl, asum, small, mag = sh[keep], sl[keep], asum[keep], small[keep], mag[keep]
        asum = asum + mag
        hit = mag <= eps_abs + eps_rel * np.abs(sh)
        small = np.where(hit, small + 1, 0)
        done = small >= 3
        if done.any():
            d = idx[done]
            val[d] = sh[done] + sl[done]
            abs_sum[d] = asum[done]
            nterms[d] = k + 1
            keep = ~done
            idx, zz, ah, al = idx[keep], zz[keep], ah[keep], al[keep]
            sh, sl, asum, small = sh[keep], sl[keep], asum[keep], small[keep]
        ah, al = dd_mul_d(ah, al, zz)
        ah, al = dd_mul_d(ah, al, gam + k)
        ah, al = dd_div_d(ah, al, k + 1.0)
    if idx.shape[0]:
        val[idx] = sh + sl
        abs_sum[idx] = asum
    return val, abs_sum, nterms


def gated_sum(base, offset, shifts, weights, orders, alpha, lam, boff,
              eps_abs, eps_rel, kmax):
    """sum_j w_j (x - s_j)_+^(alpha n_j + boff - 1) E^{n_j+1}_{alpha, alpha n_j + boff}(lam (x - s_j)^alpha)

    with ``x = base + offset`` evaluated as ``(base - s_j) + offset`` so that a
    point sitting exactly on a shift keeps its offset.  Singular points give
    ``inf``; series failures give ``nan``.
    """
    base = np.ascontiguousarray(base, dtype=np.float64)
    offset = np.ascontiguousarray(offset, dtype=np.float64)
    out = np.zeros(base.shape[0])
    for s, w, n in zip(shifts, weights, orders):
        if w == 0.0:
            continue
        beta = alpha * n + boff
        expo = beta - 1.0
        d = (base - s) + offset
        pos = d > 0.0
        if pos.any():
            dp = d[pos]
            v, _, nt = ml_series(alpha, beta, n + 1.0, lam * dp ** alpha,
                                 eps_abs, eps_rel, kmax)
            v = np.where(nt < 0, np.nan, v)
            out[pos] += w * dp ** expo * v
        zero = d == 0.0
        if zero.any():
            if expo == 0.0:
                out[zero] += w / math.gamma(beta)
            elif expo < 0.0:
                out[zero] = np.inf
    return out


def l1_sums(f, alpha):
    """Unscaled L1 sums: out[:, j] = sum_{k<j} b_k (f[:, j-k] - f[:, j-k-1])."""
    f = np.ascontiguousarray(f, dtype=np.float64)
    m, n = f.shape
    out = np.zeros((m, n))
    if n < 2:
        return out
    df = np.diff(f, axis=1)
    k = np.arange(n - 1, dtype=np.float64)
    b = (k + 1.0) ** (1.0 - alpha) - k ** (1.0 - alpha)
    for j in range(1, n):
        out[:, j] = df[:, j - 1::-1] @ b[:j]
    return out
