"""L1 discretisation of the Caputo derivative on a uniform grid."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .errors import DimensionError, DomainError


@dataclass(frozen=True)
class UniformGrid:
    t0: float
    h: float
    n: int

    def __post_init__(self):
        if not self.h > 0:
            raise DomainError("grid step h must be positive")
        if int(self.n) != self.n or self.n < 2:
            raise DomainError("grid needs at least 2 points")

    @property
    def points(self) -> np.ndarray:
        return self.t0 + self.h * np.arange(self.n)

    @classmethod
    def covering(cls, T: float, h: float) -> "UniformGrid":
        """Grid 0, h, ..., up to the last node not beyond T (+ rounding slack)."""
        n = int(math.floor(T / h + 1e-9)) + 1
        return cls(0.0, h, n)


def _first_derivative(f, h):
    d = np.zeros_like(f)
    n = f.shape[-1]
    if n == 2:
        d[..., 1] = (f[..., 1] - f[..., 0]) / h
        return d
    d[..., 1:-1] = (f[..., 2:] - f[..., :-2]) / (2.0 * h)
    d[..., -1] = (3.0 * f[..., -1] - 4.0 * f[..., -2] + f[..., -3]) / (2.0 * h)
    return d


def caputo_l1(samples, alpha: float, grid: UniformGrid) -> np.ndarray:
    """Caputo derivative of order ``alpha`` along the last axis of ``samples``.

    ``d[..., 0]`` is 0 by convention.  For ``alpha == 1`` centred differences
    are used inside and a second-order one-sided difference at the end.
    """
    if not (0.0 < alpha <= 1.0):
        raise DomainError(f"alpha must lie in (0, 1], got {alpha!r}")
    if grid.t0 != 0.0:
        raise DomainError("the Caputo lower terminal is 0: grid.t0 must be 0")
    f = np.asarray(samples, dtype=np.float64)
    if f.ndim == 0 or f.shape[-1] != grid.n:
        raise DimensionError(
            f"samples has {f.shape[-1] if f.ndim else 0} points, grid has {grid.n}")
    if alpha == 1.0:
        return _first_derivative(f, grid.h)
    lead = f.shape[:-1]
    f2 = np.ascontiguousarray(f.reshape(-1, grid.n))
    sums = kernels.l1_sums(f2, float(alpha))
    scale = grid.h ** (-alpha) / math.gamma(2.0 - alpha)
    return (scale * sums).reshape(lead + (grid.n,))
