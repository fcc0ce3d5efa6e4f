"""Gamma, Pochhammer and the three-parameter (Prabhakar) Mittag-Leffler function.

The series is summed in double-double arithmetic, which makes the usual
Kahan-compensated sum unnecessary: each term already carries its own
rounding error, and the running sum keeps about 32 significant digits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .errors import (DomainError, GammaOverflowError, PoleError,
                     SeriesConvergenceError)

EPS_ABS = 1e-16
EPS_REL = 1e-15
K_MAX = 2000
Z_MAX = 50.0
GAMMA_MAX = 170.0
# SeriesInfo.reliable threshold on the (conservative) relative error estimate
RELIABLE_REL = 1e-10

# unit roundoff of double-double arithmetic
_DD_EPS = 2.0 ** -104


def gamma_fn(x: float) -> float:
    x = float(x)
    if x <= 0.0 and x == math.floor(x):
        raise PoleError(f"Gamma has a pole at {x!r}")
    if x > GAMMA_MAX:
        raise GammaOverflowError(f"Gamma({x!r}) overflows (x > {GAMMA_MAX})")
    return math.gamma(x)


def pochhammer(gamma: float, k: int) -> float:
    """Rising factorial (gamma)_k as an iterated product."""
    if k < 0 or int(k) != k:
        raise DomainError("k must be a non-negative integer")
    if gamma <= 0:
        raise DomainError("gamma must be positive")
    out = 1.0
    for j in range(int(k)):
        out *= gamma + j
        if math.isinf(out):
            raise GammaOverflowError(f"({gamma})_{k} overflows")
    return out


@dataclass(frozen=True)
class PrabhakarParams:
    alpha: float
    beta: float
    gamma: float = 1.0

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be a positive real, got {v!r}")


@dataclass(frozen=True)
class SeriesInfo:
    value: np.ndarray | float
    abs_sum: np.ndarray | float
    nterms: np.ndarray | int
    error_estimate: np.ndarray | float
    reliable: np.ndarray | bool


def _series(alpha, beta, gam, z, eps_abs, eps_rel, kmax):
    z = np.asarray(z, dtype=np.float64)
    shape = z.shape
    flat = np.ascontiguousarray(z.ravel())
    if flat.size and np.max(np.abs(flat)) > Z_MAX:
        raise DomainError(f"|z| exceeds Z_MAX={Z_MAX}")
    if not np.all(np.isfinite(flat)):
        raise DomainError("z must be finite")
    val, asum, nt = kernels.ml_series(float(alpha), float(beta), float(gam), flat,
                                      float(eps_abs), float(eps_rel), int(kmax))
    if np.any(nt < 0):
        bad = flat[nt < 0][0]
        raise SeriesConvergenceError(
            f"series for E^{gam}_({alpha},{beta})(z={float(bad)!r}) did not converge "
            f"(a term overflowed or {kmax} terms were not enough)")
    return val.reshape(shape), asum.reshape(shape), nt.reshape(shape)


def prabhakar(params: PrabhakarParams, z, *, eps_abs=EPS_ABS, eps_rel=EPS_REL,
              kmax=K_MAX, full_output=False):
    """E^gamma_{alpha,beta}(z) = sum_k (gamma)_k z^k / (k! Gamma(alpha k + beta)).

    Accepts a scalar or an array.  With ``full_output`` a :class:`SeriesInfo`
    is returned; its error estimate combines the rounding of the Gamma
    divisors and the double-double roundoff (both proportional to the sum
    of |terms|), the final rounding to double and the truncation threshold.
    ``reliable`` is False where that estimate exceeds RELIABLE_REL relative,
    i.e. where cancellation ate the working precision.
    """
    scalar = np.ndim(z) == 0
    val, asum, nt = _series(params.alpha, params.beta, params.gamma, z,
                            eps_abs, eps_rel, kmax)
    if not full_output:
        return float(val) if scalar else val
    err = (np.abs(val) * 2.0 ** -53 + (2.0 ** -52 + 4.0 * _DD_EPS * nt) * asum
           + 3.0 * (eps_abs + eps_rel * np.abs(val)))
    reliable = err <= RELIABLE_REL * np.abs(val)
    if scalar:
        return SeriesInfo(float(val), float(asum), int(nt), float(err), bool(reliable))
    return SeriesInfo(val, asum, nt, err, reliable)


def ml_two(alpha: float, beta: float, z):
    """Two-parameter Mittag-Leffler function E_{alpha,beta}(z)."""
    return prabhakar(PrabhakarParams(alpha, beta, 1.0), z)


def prabhakar_terms(params: PrabhakarParams, z: float, nterms: int) -> np.ndarray:
    """The first ``nterms`` series terms in plain double precision."""
    out = np.empty(nterms)
    c = 1.0
    for k in range(nterms):
        out[k] = c / gamma_fn(params.alpha * k + params.beta)
        c *= z * (params.gamma + k) / (k + 1.0)
    return out


def kahan_sum(values) -> float:
    """Kahan-Babuska (Neumaier) compensated sum, in the given order."""
    s = 0.0
    c = 0.0
    for v in values:
        v = float(v)
        t = s + v
        if abs(s) >= abs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
    return s + c
