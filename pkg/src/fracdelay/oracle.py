"""Numerical reference solvers for fractional delay ODE systems.

    d^a A_j/dt^a = Theta_j(A(t)) + sum_i delta_i A_j(t - tau_i)

``solve_fdde`` is the fractional Adams-Bashforth-Moulton predictor-corrector
on a grid aligned with every delay; ``method_of_steps`` is the classical
interval-by-interval integrator for a = 1.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .errors import (DomainError, OracleDivergenceError, StepIncompatibleError,
                     ValidationError)

DIVERGENCE_LIMIT = 1e12
ALIGN_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class OracleSystem:
    dim: int
    theta: Callable
    delays: Sequence
    histories: Sequence
    alpha: float

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValidationError("dim must be a positive integer")
        if not (0.0 < self.alpha <= 1.0):
            raise DomainError(f"alpha must lie in (0, 1], got {self.alpha!r}")
        delays = []
        for tau, delta in self.delays:
            if not tau > 0:
                raise DomainError(f"delays must be positive, got tau={tau!r}")
            delays.append((float(tau), np.broadcast_to(
                np.asarray(delta, dtype=np.float64), (self.dim,)).copy()))
        object.__setattr__(self, "delays", tuple(delays))
        if len(self.histories) != self.dim:
            raise ValidationError("one history per component is required")
        object.__setattr__(self, "histories", tuple(self.histories))

    def history(self, t):
        return np.array([h(t) for h in self.histories], dtype=np.float64)

    def rhs(self, y, delayed):
        """Theta(y) + sum_i delta_i * delayed[i]."""
        out = np.asarray(self.theta(y), dtype=np.float64).copy()
        for (_, delta), yd in zip(self.delays, delayed):
            out += delta * yd
        return out


@dataclass
class Trajectory:
    t: np.ndarray
    values: np.ndarray  # shape (len(t), dim)
    dense: Callable | None = field(default=None, repr=False)

    def component(self, j):
        return self.values[:, j]

    def to_csv(self, target=None):
        """Write ``t, A1, ..., An`` rows with 17 significant digits.

        Returns the text when ``target`` is None.
        """
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t"] + [f"A{j + 1}" for j in range(self.values.shape[1])])
        for ti, row in zip(self.t, self.values):
            w.writerow([f"{ti:.17g}"] + [f"{v:.17g}" for v in row])
        text = buf.getvalue()
        if target is None:
            return text
        with open(target, "w", newline="") as fh:
            fh.write(text)
        return None


def _steps_per_delay(h, taus):
    out = []
    for tau in taus:
        m = int(round(tau / h))
        if m < 1 or abs(m * h - tau) > ALIGN_TOL * max(1.0, tau):
            raise StepIncompatibleError(
                f"step h={h!r} does not divide delay tau={tau!r}")
        out.append(m)
    return out


def compatible_step(h, taus):
    """Largest step <= h dividing every delay (delays treated as rationals)."""
    if not h > 0:
        raise DomainError("step must be positive")
    fr = [Fraction(t).limit_denominator(10 ** 6) for t in taus]
    for t, f in zip(taus, fr):
        if abs(float(f) - t) > ALIGN_TOL * max(1.0, t):
            raise StepIncompatibleError(f"delay {t!r} is not a simple rational")
    # gcd of rationals p_i/q_i = gcd(p_i * L / q_i) / L with L = lcm(q_i)
    L = 1
    for f in fr:
        L = L * f.denominator // math.gcd(L, f.denominator)
    g = 0
    for f in fr:
        g = math.gcd(g, f.numerator * (L // f.denominator))
    unit = g / L
    k = max(1, math.ceil(unit / h - 1e-12))
    return unit / k


def solve_fdde(system: OracleSystem, T: float, h: float, corrector_sweeps: int = 1):
    """Fractional ABM (PECE) trajectory on t = 0, h, ..., N h >= T.

    Delayed states come from the history when t - tau < 0 and from the
    computed grid otherwise (h must divide every tau).
    """
    if not T >= h > 0:
        raise DomainError("need T >= h > 0")
    if corrector_sweeps < 1:
        raise DomainError("at least one corrector sweep is required")
    taus = [tau for tau, _ in system.delays]
    msteps = _steps_per_delay(h, taus)
    N = int(math.ceil(T / h - 1e-9))
    a = system.alpha
    dim = system.dim

    y = np.empty((N + 1, dim))
    F = np.empty((N + 1, dim))
    y0 = system.history(0.0)
    y[0] = y0

    def delayed(n):
        out = []
        for m in msteps:
            j = n - m
            out.append(y[j] if j >= 0 else system.history(j * h))
        return out

    F[0] = system.rhs(y0, delayed(0))
    k = np.arange(N + 2, dtype=np.float64)
    bk = (k + 1.0) ** a - k ** a
    ak = (k + 2.0) ** (a + 1) + k ** (a + 1) - 2.0 * (k + 1.0) ** (a + 1)
    cp = h ** a / math.gamma(a + 1.0)
    cc = h ** a / math.gamma(a + 2.0)
    for n in range(N):
        # weights for j = 0..n, reversed so index n-j lines up
        hist_b = bk[:n + 1][::-1] @ F[:n + 1]
        pred = y0 + cp * hist_b
        a0 = n ** (a + 1) - (n - a) * (n + 1.0) ** a
        mem = a0 * F[0]
        if n >= 1:
            mem = mem + ak[:n][::-1] @ F[1:n + 1]
        dl = delayed(n + 1)
        yc = pred
        for _ in range(corrector_sweeps):
            yc = y0 + cc * (system.rhs(yc, dl) + mem)
        if not np.all(np.isfinite(yc)) or np.max(np.abs(yc)) > DIVERGENCE_LIMIT:
            raise OracleDivergenceError(
                f"solution exceeded {DIVERGENCE_LIMIT:g} at t={(n + 1) * h:.6g}")
        y[n + 1] = yc
        F[n + 1] = system.rhs(yc, dl)
    return Trajectory(h * np.arange(N + 1), y)


def _breakpoints(taus, T):
    pts = {0.0}
    frontier = {0.0}
    while frontier:
        new = set()
        for p in frontier:
            for tau in taus:
                q = p + tau
                if q < T - 1e-12 and not any(abs(q - r) <= 1e-12 for r in pts):
                    new.add(q)
        pts |= new
        frontier = new
    return sorted(pts) + [T]


def method_of_steps(system: OracleSystem, T: float, t_eval=None,
                    rtol=1e-12, atol=1e-14):
    """Integer-order (alpha = 1) reference: RK45 restarted at every breakpoint."""
    if system.alpha != 1.0:
        raise DomainError("method_of_steps requires alpha = 1")
    if not T > 0:
        raise DomainError("T must be positive")
    taus = [tau for tau, _ in system.delays]
    bps = _breakpoints(taus, T)
    starts, sols = [], []

    def state(s):
        if s <= 0:
            return system.history(s)
        # s never exceeds the start of the interval being integrated
        i = int(np.searchsorted(starts, s, side="left")) - 1
        return sols[i](s)

    y = system.history(0.0)
    for a_, b_ in zip(bps[:-1], bps[1:]):
        def f(t, yy):
            return system.rhs(yy, [state(t - tau) for tau in taus])
        res = solve_ivp(f, (a_, b_), y, method="RK45", rtol=rtol, atol=atol,
                        dense_output=True)
        if not res.success:
            raise OracleDivergenceError(f"integration failed on [{a_}, {b_}]: {res.message}")
        starts.append(a_)
        sols.append(res.sol)
        y = res.y[:, -1]
        if np.max(np.abs(y)) > DIVERGENCE_LIMIT:
            raise OracleDivergenceError(f"solution exceeded {DIVERGENCE_LIMIT:g}")

    def dense(t):
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        out = np.array([state(float(s)) for s in t])
        return out

    if t_eval is None:
        t_eval = np.linspace(0.0, T, 1001)
    t_eval = np.asarray(t_eval, dtype=np.float64)
    return Trajectory(t_eval, dense(t_eval), dense=dense)


def system_from_problem(problem) -> OracleSystem:
    """Scalar OracleSystem for a DelaySeriesProblem (Theta(A) = lam A + c0)."""
    lam, c0 = problem.lam, problem.c0
    return OracleSystem(1, lambda A: lam * A + c0, problem.delays,
                        (problem.history,), problem.alpha)
