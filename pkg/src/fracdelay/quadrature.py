"""Adaptive Gauss quadrature for history convolutions with algebraic kernels.

Computes, for a batch of times t,

    I(t) = int_{max(0, t - tau)}^{t} K(r) psi(t - tau - r) dr

where K is a sum of gated terms w (r - s)^p E(lam (r - s)^alpha), each
supported on r >= s and possibly singular there.  Every sub-interval that
is mapped by r = s + L u^q from its left end s, with q = k/alpha, k the
smallest integer giving q >= 3.  The singular term then becomes
u^(k(n+1)-1) times a power series in u^k, while the regular terms and the
history pick up only powers u^(q-1), u^q >= u^2, which the panels resolve
easily.  Panels are refined by bisection, all times at once,
one kernel call per refinement level.
"""

from __future__ import annotations

import numpy as np

from .errors import QuadratureError

_XG, _WG = np.polynomial.legendre.leggauss(15)
_XG = 0.5 * (_XG + 1.0)
_WG = 0.5 * _WG


def grading_exponent(alpha):
    k = int(np.ceil(3.0 * alpha - 1e-12))
    return k / alpha


def _segments(t, tau, shifts, kinks, q):
    """Split each integration range at shifts and history kinks.

    Every segment is graded at its left end: shifts are the singular points,
    and a range starting just past a shift (t barely beyond a delay) still
    sees the singular term from outside.
    Returns arrays (t index, start, length, grading exponent).
    """
    tid, start, length = [], [], []
    for i, ti in enumerate(t):
        lo = max(0.0, ti - tau)
        if not ti > lo:
            continue
        cuts = [lo, ti]
        cuts.extend(s for s in shifts if lo < s < ti)
        for k in kinks:
            r = (ti - tau) - k
            if lo < r < ti:
                cuts.append(r)
        cuts = np.unique(cuts)
        # a range starting just past a shift s: the singular term varies on
        # the scale eps = a - s, so add cuts at s + eps 2^k
        a = cuts[0]
        below = shifts[shifts < a]
        if below.size:
            s = below.max()
            eps = a - s
            extra = s + eps * 2.0 ** np.arange(1, 64)
            extra = extra[extra < min(cuts[1], a + 0.5 * (cuts[1] - a))]
            if extra.size:
                cuts = np.unique(np.concatenate([cuts, extra]))
        n = cuts.shape[0] - 1
        tid.extend([i] * n)
        start.extend(cuts[:-1])
        length.extend(np.diff(cuts))
    m = len(tid)
    return (np.array(tid, dtype=np.int64), np.array(start, dtype=np.float64),
            np.array(length, dtype=np.float64), np.full(m, q))


def history_convolution(t, tau, kernel, history, *, tol=1e-11, max_level=48,
                        return_error=False):
    """I(t) as above for every entry of ``t``.

    ``kernel`` must provide ``alpha``, ``active_shifts`` and
    ``eval_split(base, offset)``; ``history`` must provide ``gated(x)``
    (psi(x) for x < 0, else 0) and ``kinks``.  ``tol`` is the absolute
    error budget per unit of mapped panel width.
    """
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    out = np.zeros(t.shape[0])
    errs = np.zeros(t.shape[0])
    shifts = np.asarray(kernel.active_shifts, dtype=np.float64)
    q_sing = grading_exponent(kernel.alpha)
    tid, a, L, q = _segments(t, tau, shifts, np.asarray(history.kinks), q_sing)

    pseg = np.arange(tid.shape[0])
    u0 = np.zeros(pseg.shape[0])
    u1 = np.ones(pseg.shape[0])
    for level in range(max_level + 1):
        if pseg.shape[0] == 0:
            break
        w = u1 - u0
        half = 0.5 * w
        U = np.concatenate([u0[:, None] + w[:, None] * _XG,
                            u0[:, None] + half[:, None] * _XG,
                            (u0 + half)[:, None] + half[:, None] * _XG], axis=1)
        sa, sL, sq = a[pseg][:, None], L[pseg][:, None], q[pseg][:, None]
        off = sL * U ** sq
        jac = sL * sq * U ** (sq - 1.0)
        base = np.broadcast_to(sa, U.shape)
        K = kernel.eval_split(np.ascontiguousarray(base).ravel(), off.ravel())
        st = t[tid[pseg]][:, None]
        psi = history.gated(((st - tau) - sa) - off)
        f = K.reshape(U.shape) * psi * jac
        if not np.all(np.isfinite(f)):
            raise QuadratureError("non-finite integrand value during quadrature")
        whole = w * (f[:, :15] @ _WG)
        halves = half * (f[:, 15:30] @ _WG + f[:, 30:] @ _WG)
        err = np.abs(whole - halves)
        # the floor covers panels whose width has shrunk to roundoff level
        ok = (err <= tol * w) | (err <= 64 * np.finfo(float).eps * np.abs(halves))
        if level == max_level and not ok.all():
            worst = errs.copy()
            np.add.at(worst, tid[pseg], err)
            raise QuadratureError(
                f"adaptive quadrature did not converge after {max_level} "
                f"bisections; achieved absolute error ~{np.max(worst):.3g}",
                achieved=float(np.max(worst)))
        ti = tid[pseg[ok]]
        np.add.at(out, ti, halves[ok])
        np.add.at(errs, ti, err[ok])
        bad = ~ok
        mid = (u0 + half)[bad]
        pseg = np.repeat(pseg[bad], 2)
        u0 = np.column_stack([u0[bad], mid]).ravel()
        u1 = np.column_stack([mid, u1[bad]]).ravel()
    if return_error:
        return out, errs
    return out
