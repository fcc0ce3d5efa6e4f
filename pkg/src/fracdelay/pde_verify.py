"""Assembled solutions u(x, t) = sum_i A_i(t) phi_i(x) and their PDE residuals.

The residual r = d^a u/dt^a - H[u, ubar] is evaluated with the L1 scheme in
time and closed-form spatial derivatives; the delayed field comes from the
same coefficient callables evaluated at t - tau_i.
"""

from __future__ import annotations

import copy
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .caputo import UniformGrid, caputo_l1
from .delay_series import DelaySeriesProblem, HistoryFunction
from .errors import ConstraintError, ValidationError
from .subspace import (Cosine, Exponential, Monomial, OperatorSpec, Sine, Subspace,
                       affine_theta, apply_operator, check_invariance)

DEFAULTS_VERSION = 1

# Histories are psi_j(t) = p + r t^2 with
# lam psi_j(0) + sum_i delta_i psi_j(-tau_i) + c0_j = 0 for every mode.  The
# first condition removes the t^alpha onset of A_j at 0+, psi_j'(0) = 0 makes
# the delayed field C^1 at each breakpoint; without them the L1 residual is
# dominated by the scheme's O(h) error next to those weak singularities.
DEFAULTS = {
    "exp1d_H1": {"alpha": 0.6, "a0": 1.0, "b": [0.5, 0.2], "c1": -1.0, "c0": 0.0,
                 "delta": [1.0], "tau": [1.0], "history": [[1.0, 0.0, -0.5]]},
    "poly2d_H1": {"alpha": 0.6, "b": [1.0], "c1": -1.0, "c0": 0.5,
                  "delta": [0.5], "tau": [1.0], "history": [[2.0, 0.0, 1.0], [1.0, 0.0, 1.0]]},
    "trig3d_H1": {"alpha": 0.6, "a1": 1.0, "b": [1.0, 0.0], "c1": 0.5, "c0": 0.2,
                  "delta": [0.8], "tau": [1.0],
                  "history": [[0.6, 0.0, -1.225], [1.0, 0.0, -0.375], [0.8, 0.0, -0.3]]},
    "exp1d_H2": {"alpha": 0.6, "a0": 1.0, "b": [0.5, 0.3], "c1": -1.0, "c0": 0.0,
                 "delta": [0.25], "tau": [1.0], "history": [[1.0, 0.0, 1.0]]},
    "poly2d_H2": {"alpha": 0.6, "b": [1.0, 0.5, 0.2, 0.1], "c1": 0.3, "c0": -0.2,
                  "delta": [-0.5], "tau": [1.0], "history": [[1.0, 0.0, -0.8], [0.5, 0.0, -0.2]]},
    "trig2d_H2": {"alpha": 0.6, "a0": 1.0, "b": [1.0, 0.5], "c1": 0.5, "c0": 0.0,
                  "delta": [0.4], "tau": [1.0], "history": [[1.0, 0.0, 0.25], [-0.5, 0.0, -0.125]]},
    "twodelay_trig_H2": {"alpha": 0.6, "a0": 1.0, "b": [1.0, 0.5, 0.2], "c1": 0.5, "c0": 0.0,
                         "delta": [0.4, 0.2], "tau": [0.5, 1.0],
                         "history": [[0.9, 0.0, -0.3], [0.6, 0.0, -0.2]]},
}
NAMES = tuple(DEFAULTS)

H_BASE = 1.0 / 256


def _structure(name, p):
    """(operator, subspace, per-mode lam, per-mode forcing) in closed form."""
    b = [float(v) for v in p["b"]]
    c0, c1 = float(p["c0"]), float(p["c1"])
    delta = tuple(float(d) for d in p["delta"])
    r_given = p.get("r")

    def op(form, d, r):
        return OperatorSpec(form, d, r_given if r_given is not None else r, delta)

    if name in ("exp1d_H1", "exp1d_H2"):
        a0 = float(p["a0"])
        f = (lambda k: k + 1) if name == "exp1d_H1" else (lambda k: 1)
        r = [c0, c1] + [-f(k) * a0 ** 2 * b[k] for k in range(1, len(b))]
        sign = 1.0 if name == "exp1d_H1" else -1.0
        lam = a0 ** 2 * b[0] + c1
        return op(name[-2:], b, r), Subspace([Exponential(sign * a0)]), [lam], [0.0]
    if name in ("poly2d_H1", "poly2d_H2"):
        return (op(name[-2:], b, [c0, c1]), Subspace([Monomial(0), Monomial(1)]),
                [c1, c1], [c0, 0.0])
    if name == "trig3d_H1":
        a1 = float(p["a1"])
        b0, b1 = (b + [0.0])[:2]
        k = math.sqrt(a1)
        gam = c1 - a1 * b0
        return (op("H1", [b0, b1], [c0, c1, 2 * a1 * b1]),
                Subspace([Monomial(0), Cosine(k), Sine(k)]), [c1, gam, gam], [c0, 0.0, 0.0])
    if name in ("trig2d_H2", "twodelay_trig_H2"):
        a0 = float(p["a0"])
        bb = (b + [0.0, 0.0])[:3]
        k = math.sqrt(a0)
        gam = c1 - a0 * bb[0]
        r = [c0, c1, bb[1] * a0, a0 * bb[2]]
        return (op("H2", b, r), Subspace([Cosine(k), Sine(k)]), [gam, gam], [0.0, 0.0])
    raise ValidationError(f"unknown solution name {name!r}; choose from {', '.join(NAMES)}")


@dataclass(frozen=True, eq=False)
class AssembledSolution:
    name: str
    subspace: Subspace
    coefficients: tuple
    operator: OperatorSpec
    delays: tuple
    alpha: float
    params: dict = field(repr=False, default_factory=dict)

    def __post_init__(self):
        if len(self.coefficients) != self.subspace.dim:
            raise ValidationError("one coefficient per basis function is required")

    @property
    def tau_star(self):
        return max(self.delays)

    def coefficient_values(self, t):
        """A_i(t) for all modes, shape (len(t), n); t may dip into [-tau*, 0)."""
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        uniq, inv = np.unique(t, return_inverse=True)
        vals = np.column_stack([np.atleast_1d(c(uniq)) for c in self.coefficients])
        return vals[inv]

    def __call__(self, x, t):
        """u(x, t) on the tensor grid, shape (len(x), len(t))."""
        A = self.coefficient_values(t)
        return self.subspace.combine(A, np.atleast_1d(np.asarray(x, dtype=np.float64))).T

    def history_field(self, x, t):
        """The prescribed initial data sum psi_j(t) phi_j(x) for t in [-tau*, 0]."""
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        A = np.column_stack([c.history(t) for c in self.coefficients])
        return self.subspace.combine(A, np.atleast_1d(np.asarray(x, dtype=np.float64))).T


def default_params(name):
    if name not in DEFAULTS:
        raise ValidationError(f"unknown solution name {name!r}; choose from {', '.join(NAMES)}")
    return copy.deepcopy(DEFAULTS[name])


def named_solution(name, params=None, *, lam_shift=0.0, quad_tol=None):
    """Assemble a named exact solution.

    ``params`` overrides entries of the defaults table.  ``lam_shift`` adds a
    constant to every mode's rate (used as a negative control).  Raises
    ConstraintError if the operator does not leave the span invariant or the
    reduction is not the affine, decoupled one the closed form assumes.
    """
    p = default_params(name)
    if params:
        unknown = set(params) - set(p) - {"r"}
        if unknown:
            raise ValidationError(f"unknown parameter(s) for {name}: {sorted(unknown)}")
        p.update(copy.deepcopy(params))
    op, W, lams, forcing = _structure(name, p)
    taus = tuple(float(t) for t in p["tau"])
    if len(taus) != len(op.delta):
        raise ValidationError("tau and delta must have the same length")
    if len(p["history"]) != W.dim:
        raise ValidationError(f"{name} needs {W.dim} history polynomials")

    rep = check_invariance(op, W, trials=10)
    if not rep.invariant:
        raise ConstraintError(
            f"{name}: parameters break the invariance condition (residual {rep.residual:.3g})")
    aff = affine_theta(op, W)
    if aff is None:
        raise ConstraintError(f"{name}: reduced system is nonlinear for these parameters")
    M, c = aff
    expected = np.diag(lams)
    if np.max(np.abs(M - expected)) > 1e-8 * max(1.0, np.max(np.abs(M))) or \
            np.max(np.abs(c - forcing)) > 1e-8 * max(1.0, np.max(np.abs(c))):
        raise ConstraintError(f"{name}: reduced system does not match the closed-form rates")

    tau_star = max(taus)
    kw = {} if quad_tol is None else {"quad_tol": quad_tol}
    problems = tuple(
        DelaySeriesProblem(float(p["alpha"]), lams[j] + lam_shift, forcing[j],
                           tuple(zip(taus, op.delta)),
                           HistoryFunction.polynomial(p["history"][j], tau_star), **kw)
        for j in range(W.dim))
    return AssembledSolution(name, W, problems, op, taus, float(p["alpha"]), p)


# ---------------------------------------------------------------- residuals

@dataclass
class ResidualReport:
    name: str
    h: float
    t_min: float
    max_norm: float
    rms_norm: float
    x: np.ndarray = field(repr=False)
    t: np.ndarray = field(repr=False)
    field: np.ndarray = field(repr=False)   # shape (len(x), len(t))

    def to_csv(self):
        buf = io.StringIO()
        buf.write("x,t,residual\n")
        for i, xv in enumerate(self.x):
            for j, tv in enumerate(self.t):
                buf.write(f"{xv:.17g},{tv:.17g},{self.field[i, j]:.17g}\n")
        return buf.getvalue()


def _residual(sol, x, h, A, Adel, t_min):
    n = A.shape[0]
    grid = UniformGrid(0.0, h, n)
    u = sol.subspace.combine(A, x).T                      # (nx, nt)
    lhs = caputo_l1(u, sol.alpha, grid)
    rhs = apply_operator(sol.operator, A, Adel, sol.subspace, x).T
    t = grid.points
    keep = t >= t_min - 1e-12 * max(1.0, t_min)
    r = (lhs - rhs)[:, keep]
    return ResidualReport(sol.name, h, t_min, float(np.max(np.abs(r))),
                          float(np.sqrt(np.mean(r * r))), x, t[keep], r)


def _values(sol, t):
    A = sol.coefficient_values(t)
    Adel = np.stack([sol.coefficient_values(t - tau) for tau in sol.delays])
    return A, Adel


def pde_residual(sol: AssembledSolution, xgrid, tgrid: UniformGrid, t_min=None):
    """Residual field on xgrid x tgrid for t >= t_min (default 4 h)."""
    if tgrid.t0 != 0.0:
        raise ValidationError("the time grid must start at 0")
    x = np.atleast_1d(np.asarray(xgrid, dtype=np.float64))
    t_min = 4.0 * tgrid.h if t_min is None else float(t_min)
    A, Adel = _values(sol, tgrid.points)
    return _residual(sol, x, tgrid.h, A, Adel, t_min)


@dataclass
class ConvergenceTable:
    name: str
    rows: list          # ResidualReport per h, coarse to fine

    @property
    def max_norms(self):
        return [r.max_norm for r in self.rows]

    @property
    def rates(self):
        m = self.max_norms
        return [math.log2(a / b) if a > 0 and b > 0 else float("nan")
                for a, b in zip(m[:-1], m[1:])]

    @property
    def monotone(self):
        m = self.max_norms
        return all(b < a for a, b in zip(m[:-1], m[1:]))

    def summary(self):
        lines = [f"solution: {self.name}",
                 f"t window: [{self.rows[0].t_min:.17g}, {self.rows[0].t[-1]:.17g}]",
                 f"x points: {len(self.rows[0].x)}",
                 "h,max_norm,rms_norm,rate"]
        rates = [float("nan")] + self.rates
        for r, q in zip(self.rows, rates):
            lines.append(f"{r.h:.17g},{r.max_norm:.17g},{r.rms_norm:.17g},{q:.17g}")
        return "\n".join(lines) + "\n"


def convergence_table(sol: AssembledSolution, hs=(H_BASE, H_BASE / 2, H_BASE / 4),
                      T=None, xgrid=None, t_min=None):
    """Residual norms under refinement on a fixed window [t_min, T].

    Coefficients are evaluated once on the finest grid and subsampled; the
    window start defaults to 4 times the coarsest step.
    """
    hs = sorted((float(h) for h in hs), reverse=True)
    hf = hs[-1]
    ratios = [h / hf for h in hs]
    if any(abs(q - round(q)) > 1e-9 for q in ratios):
        raise ValidationError("steps must be nested (each a multiple of the finest)")
    T = 2.0 * sol.tau_star if T is None else float(T)
    x = np.linspace(0.0, 1.0, 21) if xgrid is None else np.asarray(xgrid, dtype=np.float64)
    t_min = 4.0 * hs[0] if t_min is None else float(t_min)
    fine = UniformGrid.covering(T, hf)
    A, Adel = _values(sol, fine.points)
    rows = []
    for h, q in zip(hs, ratios):
        s = int(round(q))
        rows.append(_residual(sol, x, h, A[::s], Adel[:, ::s], t_min))
    return ConvergenceTable(sol.name, rows)
