"""Double-double arithmetic and the scalar series kernels built on it.

Every function here is written so that it runs unchanged on Python floats,
on numpy arrays (elementwise) and inside numba-compiled code, where
``register_jitable`` inlines it into the caller.
"""

import math

try:
    from numba.extending import register_jitable
except ImportError:  # pragma: no cover - exercised only without numba
    def register_jitable(func):
        return func


_SPLIT = 134217729.0  # 2**27 + 1


@register_jitable
def two_sum(a, b):
    s = a + b
    bb = s - a
    err = (a - (s - bb)) + (b - bb)
    return s, err


@register_jitable
def split(a):
    c = _SPLIT * a
    hi = c - (c - a)
    return hi, a - hi


@register_jitable
def two_prod(a, b):
    p = a * b
    ah, al = split(a)
    bh, bl = split(b)
    err = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, err


@register_jitable
def dd_add(ah, al, bh, bl):
    s, e = two_sum(ah, bh)
    e = e + (al + bl)
    return two_sum(s, e)


@register_jitable
def dd_mul_d(hi, lo, b):
    p, e = two_prod(hi, b)
    e = e + lo * b
    return two_sum(p, e)


@register_jitable
def dd_div_d(hi, lo, b):
    q = hi / b
    p, e = two_prod(q, b)
    r = ((hi - p) - e + lo) / b
    return two_sum(q, r)


# Largest argument for which math.gamma stays finite with margin.
GAMMA_DIRECT_MAX = 170.0


@register_jitable
def recip_gamma_scaled(hi, lo, x):
    """(hi + lo) / Gamma(x) in double-double; log-gamma route above overflow."""
    if x <= GAMMA_DIRECT_MAX:
        return dd_div_d(hi, lo, math.gamma(x))
    return hi * math.exp(-math.lgamma(x)), 0.0


@register_jitable
def ml_scalar(alpha, beta, gam, z, eps_abs, eps_rel, kmax, gtab):
    """Prabhakar series at one point.

    ``gtab`` holds Gamma(alpha*k + beta) for the first ``len(gtab)`` values
    of k (entries beyond are computed on the fly).  Returns
    ``(value, sum of |terms|, number of terms)``; the term count is -1 when
    the stopping rule never fired or a term overflowed.
    """
    ah = 1.0
    al = 0.0
    sh = 0.0
    sl = 0.0
    abs_sum = 0.0
    small = 0
    ntab = gtab.shape[0]
    for k in range(kmax):
        x = alpha * k + beta
        if k < ntab:
            th, tl = dd_div_d(ah, al, gtab[k])
        else:
            th, tl = recip_gamma_scaled(ah, al, x)
        sh, sl = dd_add(sh, sl, th, tl)
        mag = abs(th)
        if not mag < math.inf:
            return math.nan, abs_sum, -1
        abs_sum += mag
        if mag <= eps_abs + eps_rel * abs(sh):
            small += 1
            if small >= 3:
                return sh + sl, abs_sum, k + 1
        else:
            small = 0
        ah, al = dd_mul_d(ah, al, z)
        ah, al = dd_mul_d(ah, al, gam + k)
        ah, al = dd_div_d(ah, al, k + 1.0)
    return sh + sl, abs_sum, -1
