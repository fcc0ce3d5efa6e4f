"""Closed-form coefficients of linear fractional delay equations.

Solves  d^a A/dt^a = lam A(t) + sum_i delta_i A(t - tau_i) + c0,  A = psi on
[-tau*, 0], for one or two delays, as a finite sum of delayed Prabhakar
terms plus a history convolution.  Every term has the form

    w (x - s)^(alpha n + b - 1) E^{n+1}_{alpha, alpha n + b}(lam (x - s)^alpha),   x >= s

with b = 1 for the homogeneous part, b = alpha for the convolution kernel
and b = alpha + 1 for the forcing part.  Terms with s > x vanish (Heaviside
gate), so the sums are finite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels
from .errors import (DomainError, SeriesConvergenceError, SingularityError,
                     ValidationError)
from .quadrature import history_convolution
from .special import EPS_ABS, EPS_REL, K_MAX, Z_MAX

QUAD_TOL = 1e-11
# exp(18) * 2^-52 ~ 1.5e-8: beyond this the kernel sums are not trustworthy
CANCEL_LIMIT = 18.0


def heaviside(t):
    """H(t) = 1 for t >= 0 (H(0) = 1), else 0."""
    out = (np.asarray(t) >= 0).astype(np.int64)
    return int(out) if out.ndim == 0 else out


class HistoryFunction:
    """Initial history psi on [-tau_star, 0], extended by psi(0) for t >= 0.

    Build with :meth:`constant`, :meth:`polynomial` (ascending coefficients,
    psi(t) = c0 + c1 t + ...) or :meth:`samples` (linear interpolation).
    """

    def __init__(self, kind, tau_star, coeffs=None, times=None, values=None):
        if not tau_star > 0:
            raise DomainError("history tau_star must be positive")
        self.kind = kind
        self.tau_star = float(tau_star)
        if kind == "polynomial":
            self.coeffs = np.atleast_1d(np.asarray(coeffs, dtype=np.float64))
            if self.coeffs.size == 0 or not np.all(np.isfinite(self.coeffs)):
                raise DomainError("polynomial history needs finite coefficients")
            self.kinks = np.empty(0)
        elif kind == "samples":
            times = np.asarray(times, dtype=np.float64)
            values = np.asarray(values, dtype=np.float64)
            if times.ndim != 1 or times.shape != values.shape or times.size < 2:
                raise DomainError("sampled history needs matching 1-D times/values")
            if np.any(np.diff(times) <= 0):
                raise DomainError("history sample times must increase strictly")
            if times[0] > -self.tau_star + 1e-12 or times[-1] != 0.0:
                raise DomainError("history samples must cover [-tau_star, 0] and end at 0")
            if not np.all(np.isfinite(values)):
                raise DomainError("history samples must be finite")
            self.times, self.values = times, values
            self.kinks = times[(times > -self.tau_star) & (times < 0)]
        else:
            raise DomainError(f"unknown history kind {kind!r}")

    @classmethod
    def constant(cls, c, tau_star):
        return cls("polynomial", tau_star, coeffs=[c])

    @classmethod
    def polynomial(cls, coeffs, tau_star):
        return cls("polynomial", tau_star, coeffs=coeffs)

    @classmethod
    def samples(cls, times, values, tau_star=None):
        times = np.asarray(times, dtype=np.float64)
        return cls("samples", -times[0] if tau_star is None else tau_star,
                   times=times, values=values)

    def _raw(self, t):
        if self.kind == "polynomial":
            return np.polynomial.polynomial.polyval(t, self.coeffs)
        return np.interp(t, self.times, self.values)

    @property
    def psi0(self) -> float:
        return float(self._raw(0.0))

    def __call__(self, t):
        t = np.asarray(t, dtype=np.float64)
        if np.any(t < -self.tau_star * (1 + 1e-12)):
            raise DomainError("history evaluated before -tau_star")
        out = np.where(t >= 0, self.psi0, self._raw(np.minimum(t, 0.0)))
        return float(out) if out.ndim == 0 else out

    @staticmethod
    def gate(t):
        """g(t) = 1 for t < 0, 0 for t >= 0."""
        out = (np.asarray(t) < 0).astype(np.int64)
        return int(out) if out.ndim == 0 else out

    def gated(self, t):
        t = np.asarray(t, dtype=np.float64)
        return np.where(t < 0, self._raw(np.clip(t, -self.tau_star, 0.0)), 0.0)

    def to_dict(self):
        if self.kind == "polynomial":
            return {"kind": "polynomial", "coeffs": self.coeffs.tolist(),
                    "tau_star": self.tau_star}
        return {"kind": "samples", "times": self.times.tolist(),
                "values": self.values.tolist(), "tau_star": self.tau_star}


@dataclass(frozen=True, eq=False)
class GatedKernel:
    """sum_j w_j (x - s_j)_+^(alpha n_j + boff - 1) E^{n_j+1}_{alpha, alpha n_j + boff}(lam (x - s_j)^alpha)"""

    alpha: float
    lam: float
    boff: float
    shifts: np.ndarray
    weights: np.ndarray
    orders: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "shifts", np.ascontiguousarray(self.shifts, dtype=np.float64))
        object.__setattr__(self, "weights", np.ascontiguousarray(self.weights, dtype=np.float64))
        object.__setattr__(self, "orders", np.ascontiguousarray(self.orders, dtype=np.int64))

    def scaled(self, factor):
        return GatedKernel(self.alpha, self.lam, self.boff, self.shifts,
                           self.weights * factor, self.orders)

    @property
    def active_shifts(self):
        return np.unique(self.shifts[self.weights != 0.0])

    def eval_split(self, base, offset):
        """Kernel at base + offset, with the difference to each shift formed
        as (base - s) + offset."""
        base = np.ascontiguousarray(base, dtype=np.float64)
        offset = np.ascontiguousarray(offset, dtype=np.float64)
        if base.size and self.lam != 0.0:
            span = np.max(base + offset) - np.min(self.shifts)
            if abs(self.lam) * max(span, 0.0) ** self.alpha > Z_MAX * (1 + 1e-12):
                raise DomainError(
                    f"|lambda| (t - s)^alpha exceeds Z_MAX={Z_MAX}; "
                    "shorten the horizon or reduce |lambda|")
            # the alternating series loses about exp(|lam|^(1/alpha) span)
            # relative to the double-precision Gamma divisors
            if self.lam < 0 and abs(self.lam) ** (1.0 / self.alpha) * span > CANCEL_LIMIT:
                raise SeriesConvergenceError(
                    f"series cancellation too severe: |lambda|^(1/alpha) (t - s) = "
                    f"{abs(self.lam) ** (1.0 / self.alpha) * span:.3g} > {CANCEL_LIMIT}")
        out = kernels.gated_sum(base, offset, self.shifts, self.weights, self.orders,
                                float(self.alpha), float(self.lam), float(self.boff),
                                EPS_ABS, EPS_REL, K_MAX)
        if np.any(np.isnan(out)):
            raise SeriesConvergenceError("Prabhakar series did not converge in kernel sum")
        return out

    def __call__(self, x, exclude_singular=False):
        x = np.asarray(x, dtype=np.float64)
        flat = np.ascontiguousarray(x.ravel())
        out = self.eval_split(flat, np.zeros_like(flat))
        sing = np.isinf(out)
        if sing.any():
            if not exclude_singular:
                raise SingularityError(
                    f"kernel term singular at x={flat[sing][0]!r}; "
                    "use exclude_singular=True for the regular part")
            for i in np.flatnonzero(sing):
                keep = self.shifts != flat[i]
                sub = GatedKernel(self.alpha, self.lam, self.boff, self.shifts[keep],
                                  self.weights[keep], self.orders[keep])
                out[i] = sub.eval_split(flat[i:i + 1], np.zeros(1))[0]
        out = out.reshape(x.shape)
        return float(out) if out.ndim == 0 else out


def _delay_terms(delays, t_max):
    """Shifts, weights and orders of the expansion of 1/(s^a - lam - sum d_i e^{-s tau_i})."""
    if len(delays) == 1:
        (tau, delta), = delays
        n = np.arange(int(math.floor(t_max / tau)) + 2)
        return n * tau, float(delta) ** n, n
    if len(delays) == 2:
        (t1, d1), (t2, d2) = delays
        nmax = int(math.floor(t_max / min(t1, t2))) + 1
        shifts, weights, orders = [], [], []
        for n in range(nmax + 1):
            for m in range(n + 1):
                s = (n - m) * t1 + m * t2
                # per-term Heaviside: keep only shifts that can be reached
                if s > t_max * (1 + 1e-12) + 1e-300:
                    continue
                shifts.append(s)
                weights.append(math.comb(n, m) * d1 ** (n - m) * d2 ** m)
                orders.append(n)
        return np.array(shifts), np.array(weights), np.array(orders)
    raise ValidationError("closed form available for one or two delays only")


def _kernel(alpha, lam, delays, t_max, boff):
    s, w, n = _delay_terms(delays, max(float(t_max), 0.0))
    return GatedKernel(alpha, lam, boff, s, w, n)


def homogeneous_kernel(t, alpha, lam, delta, tau):
    """sum_n delta^n H(t - n tau) (t - n tau)^(alpha n) E^{n+1}_{alpha, alpha n + 1}(lam (t - n tau)^alpha)"""
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0):
        raise DomainError("homogeneous_kernel needs t >= 0")
    return _kernel(alpha, lam, [(tau, delta)], np.max(t, initial=0.0), 1.0)(t)


def impulse_kernel(t, alpha, lam, delta, tau, exclude_singular=False):
    """sum_n delta^n H(t - n tau) (t - n tau)^(alpha n + alpha - 1) E^{n+1}_{alpha, alpha n + alpha}(...)

    At t = n tau with a negative exponent the n-th term is infinite; this
    raises :class:`SingularityError` unless ``exclude_singular`` is set, in
    which case that term is left out.
    """
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0):
        raise DomainError("impulse_kernel needs t >= 0")
    k = _kernel(alpha, lam, [(tau, delta)], np.max(t, initial=0.0), alpha)
    return k(t, exclude_singular=exclude_singular)


def forced_term(t, alpha, c1, c0, delta, tau):
    """sum_n c0 delta^n H(t - n tau) (t - n tau)^(alpha(n+1)) E^{n+1}_{alpha, alpha n + alpha + 1}(c1 (t - n tau)^alpha)"""
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0):
        raise DomainError("forced_term needs t >= 0")
    if c0 == 0.0:
        out = np.zeros_like(t)
        return float(out) if out.ndim == 0 else out
    return _kernel(alpha, c1, [(tau, delta)], np.max(t, initial=0.0),
                   alpha + 1.0).scaled(c0)(t)


class _CallableKernel:
    """Adapter so a plain callable can be used with the convolution driver."""

    def __init__(self, func, alpha):
        self.func = func
        self.alpha = alpha
        self.active_shifts = np.array([0.0])

    def eval_split(self, base, offset):
        return np.asarray(self.func(base + offset), dtype=np.float64)


def convolve_history(kernel, history, t, tau, alpha=None, tol=QUAD_TOL):
    """int_0^t kernel(r) psi(t - tau - r) g(t - tau - r) dr.

    The gate limits the range to r in (max(0, t - tau), t].  ``kernel`` is
    normally a :class:`GatedKernel`; any other callable is treated as
    possibly singular at r = 0 only, and needs ``alpha`` for the grading.
    """
    if not isinstance(kernel, GatedKernel):
        if alpha is None:
            raise ValidationError("alpha is required for a plain callable kernel")
        kernel = _CallableKernel(kernel, alpha)
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr < 0):
        raise DomainError("convolve_history needs t >= 0")
    out = history_convolution(t_arr.ravel(), float(tau), kernel, history, tol=tol)
    out = out.reshape(t_arr.shape)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class DelaySeriesProblem:
    """d^a A/dt^a = lam A(t) + sum_i delta_i A(t - tau_i) + c0, A = history on [-tau*, 0]."""

    alpha: float
    lam: float
    c0: float
    delays: tuple
    history: HistoryFunction
    quad_tol: float = QUAD_TOL
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not (0.0 < self.alpha <= 1.0):
            raise DomainError(f"alpha must lie in (0, 1], got {self.alpha!r}")
        delays = tuple((float(tau), float(d)) for tau, d in self.delays)
        if not delays:
            raise DomainError("at least one delay is required")
        for tau, _ in delays:
            if not tau > 0:
                raise DomainError(f"delays must be positive, got tau={tau!r}")
        object.__setattr__(self, "delays", delays)
        if self.history.tau_star < self.tau_star * (1 - 1e-12):
            raise DomainError("history must be defined on [-tau*, 0] with tau* = max tau_i")

    @property
    def tau_star(self) -> float:
        return max(tau for tau, _ in self.delays)

    def evaluate(self, t):
        """A(t) for scalar or array t >= -tau*; history values for t < 0."""
        t = np.asarray(t, dtype=np.float64)
        flat = t.ravel()
        out = np.empty(flat.shape[0])
        neg = flat < 0
        if neg.any():
            out[neg] = self.history(flat[neg])
        pos = ~neg
        if pos.any():
            out[pos] = self._positive(flat[pos])
        out = out.reshape(t.shape)
        return float(out) if out.ndim == 0 else out

    __call__ = evaluate

    def _positive(self, t):
        t_max = float(np.max(t))
        a = self.alpha
        hom = _kernel(a, self.lam, self.delays, t_max, 1.0)
        res = self.history.psi0 * hom.eval_split(t, np.zeros_like(t))
        imp = _kernel(a, self.lam, self.delays, t_max, a)
        for tau, delta in self.delays:
            if delta != 0.0:
                res += history_convolution(t, tau, imp.scaled(delta), self.history,
                                           tol=self.quad_tol)
        if self.c0 != 0.0:
            frc = _kernel(a, self.lam, self.delays, t_max, a + 1.0)
            res += self.c0 * frc.eval_split(t, np.zeros_like(t))
        return res


def coefficient(t, problem: DelaySeriesProblem):
    """Closed-form A(t) for a single-delay problem."""
    if len(problem.delays) != 1:
        raise ValidationError("coefficient() takes a single-delay problem; "
                              "use coefficient_multi_delay for two delays")
    return problem.evaluate(t)


def coefficient_multi_delay(t, problem: DelaySeriesProblem):
    """Closed-form A(t) for a two-delay problem (double binomial sum)."""
    if len(problem.delays) != 2:
        raise ValidationError("coefficient_multi_delay() takes exactly two delays")
    return problem.evaluate(t)
