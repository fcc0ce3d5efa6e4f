"""numba-compiled versions of the hot kernels (see ``_kernels_numpy``).

Gamma tables are filled on the Python side: numba's own ``math.gamma`` is
an ulp off at some integer arguments, and the alternating series amplify
that by the ratio of sum |terms| to |sum|.
"""

import math
from functools import lru_cache

import numpy as np
from numba import njit

from ._dd import GAMMA_DIRECT_MAX, ml_scalar


@lru_cache(maxsize=4096)
def _gamma_table(alpha, beta, kmax):
    n = 0
    while n < kmax and alpha * n + beta <= GAMMA_DIRECT_MAX:
        n += 1
    tab = np.array([math.gamma(alpha * k + beta) for k in range(n)])
    tab.setflags(write=False)
    return tab


@njit(cache=True)
def _ml_series(alpha, beta, gam, z, eps_abs, eps_rel, kmax, gtab):
    m = z.shape[0]
    val = np.empty(m)
    abs_sum = np.empty(m)
    nterms = np.empty(m, dtype=np.int64)
    for i in range(m):
        v, a, nt = ml_scalar(alpha, beta, gam, z[i], eps_abs, eps_rel, kmax, gtab)
        val[i] = v
        abs_sum[i] = a
        nterms[i] = nt
    return val, abs_sum, nterms


def ml_series(alpha, beta, gam, z, eps_abs, eps_rel, kmax):
    z = np.ascontiguousarray(z, dtype=np.float64)
    return _ml_series(alpha, beta, gam, z, eps_abs, eps_rel, kmax,
                      _gamma_table(alpha, beta, kmax))


@njit(cache=True)
def _gated_sum(base, offset, shifts, weights, orders, alpha, lam, boff,
               eps_abs, eps_rel, kmax, tabs, tablen, which):
    m = base.shape[0]
    out = np.zeros(m)
    for j in range(shifts.shape[0]):
        w = weights[j]
        if w == 0.0:
            continue
        n = orders[j]
        beta = alpha * n + boff
        expo = beta - 1.0
        gam = n + 1.0
        gtab = tabs[which[j], :tablen[which[j]]]
        for i in range(m):
            d = (base[i] - shifts[j]) + offset[i]
            if d > 0.0:
                v, _, nt = ml_scalar(alpha, beta, gam, lam * d ** alpha,
                                     eps_abs, eps_rel, kmax, gtab)
                if nt < 0:
                    out[i] = np.nan
                else:
                    out[i] += w * d ** expo * v
            elif d == 0.0:
                if expo == 0.0:
                    out[i] += w / gtab[0]
                elif expo < 0.0:
                    out[i] = np.inf
    return out


def gated_sum(base, offset, shifts, weights, orders, alpha, lam, boff,
              eps_abs, eps_rel, kmax):
    orders = np.ascontiguousarray(orders, dtype=np.int64)
    uniq, which = np.unique(orders, return_inverse=True)
    tables = [_gamma_table(alpha, alpha * int(n) + boff, kmax) for n in uniq]
    tablen = np.array([t.shape[0] for t in tables], dtype=np.int64)
    tabs = np.zeros((len(tables), max(1, tablen.max(initial=1))))
    for r, t in enumerate(tables):
        tabs[r, :t.shape[0]] = t
    return _gated_sum(np.ascontiguousarray(base, dtype=np.float64),
                      np.ascontiguousarray(offset, dtype=np.float64),
                      np.ascontiguousarray(shifts, dtype=np.float64),
                      np.ascontiguousarray(weights, dtype=np.float64),
                      orders, alpha, lam, boff, eps_abs, eps_rel, kmax,
                      tabs, tablen, which.astype(np.int64))


@njit(cache=True)
def _l1_sums(f, alpha):
    m, n = f.shape
    out = np.zeros((m, n))
    if n < 2:
        return out
    b = np.empty(n - 1)
    for k in range(n - 1):
        b[k] = (k + 1.0) ** (1.0 - alpha) - float(k) ** (1.0 - alpha)
    for r in range(m):
        for j in range(1, n):
            acc = 0.0
            for k in range(j):
                acc += b[k] * (f[r, j - k] - f[r, j - k - 1])
            out[r, j] = acc
    return out


def l1_sums(f, alpha):
    return _l1_sums(np.ascontiguousarray(f, dtype=np.float64), float(alpha))
