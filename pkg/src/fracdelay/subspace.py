"""Invariant subspaces of the reaction-diffusion operators H1 and H2.

    H1[u, ubar] = D(u) u_xx + D'(u) u_x^2 + R(u) + sum_i delta_i ubar_i
    H2[u, ubar] = D(u) u_xx + R(u) + sum_i delta_i ubar_i

with polynomial D and R.  Invariance of a span is certified numerically:
the operator image of random elements is sampled on a Chebyshev grid and
projected back onto the basis by least squares.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .delay_series import DelaySeriesProblem
from .errors import DimensionError, IllConditionedBasisError, ValidationError
from .oracle import OracleSystem

DEFAULT_SEED = 20240611
DEFAULT_INTERVAL = (0.1, 2.1)
COND_LIMIT = 1e8


# ---------------------------------------------------------------- bases

@dataclass(frozen=True)
class Monomial:
    k: int

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 0:
            raise ValidationError(f"monomial degree must be a non-negative integer, got {self.k!r}")
        object.__setattr__(self, "k", int(self.k))

    def eval(self, x, d=0):
        k = self.k
        if d > k:
            return np.zeros_like(x)
        return math.perm(k, d) * x ** (k - d)

    @property
    def label(self):
        return "1" if self.k == 0 else ("x" if self.k == 1 else f"x^{self.k}")


@dataclass(frozen=True)
class Exponential:
    nu: float

    def eval(self, x, d=0):
        return self.nu ** d * np.exp(self.nu * x)

    @property
    def label(self):
        return f"exp({self.nu:g}x)"


@dataclass(frozen=True)
class Cosine:
    kappa: float

    def eval(self, x, d=0):
        k = self.kappa
        return [np.cos(k * x), -k * np.sin(k * x), -k * k * np.cos(k * x)][d]

    @property
    def label(self):
        return f"cos({self.kappa:g}x)"


@dataclass(frozen=True)
class Sine:
    omega: float

    def eval(self, x, d=0):
        w = self.omega
        return [np.sin(w * x), w * np.cos(w * x), -w * w * np.sin(w * x)][d]

    @property
    def label(self):
        return f"sin({self.omega:g}x)"


@dataclass(frozen=True)
class ExpCosine:
    mu: float
    kappa: float

    def eval(self, x, d=0):
        m, k = self.mu, self.kappa
        e, c, s = np.exp(m * x), np.cos(k * x), np.sin(k * x)
        if d == 0:
            return e * c
        if d == 1:
            return e * (m * c - k * s)
        return e * ((m * m - k * k) * c - 2 * m * k * s)

    @property
    def label(self):
        return f"exp({self.mu:g}x)cos({self.kappa:g}x)"


@dataclass(frozen=True)
class ExpSine:
    mu: float
    omega: float

    def eval(self, x, d=0):
        m, w = self.mu, self.omega
        e, c, s = np.exp(m * x), np.cos(w * x), np.sin(w * x)
        if d == 0:
            return e * s
        if d == 1:
            return e * (m * s + w * c)
        return e * ((m * m - w * w) * s + 2 * m * w * c)

    @property
    def label(self):
        return f"exp({self.mu:g}x)sin({self.omega:g}x)"


@dataclass(frozen=True)
class Subspace:
    basis: tuple

    def __post_init__(self):
        object.__setattr__(self, "basis", tuple(self.basis))
        if not self.basis:
            raise ValidationError("a subspace needs at least one basis function")

    @property
    def dim(self):
        return len(self.basis)

    def matrix(self, x, d=0):
        x = np.asarray(x, dtype=np.float64)
        return np.stack([np.broadcast_to(f.eval(x, d), x.shape) for f in self.basis], axis=-1)

    def combine(self, coeffs, x, d=0):
        """sum_i coeffs[..., i] phi_i^(d)(x); result shape coeffs.shape[:-1] + x.shape."""
        coeffs = np.asarray(coeffs, dtype=np.float64)
        if coeffs.shape[-1] != self.dim:
            raise DimensionError(f"expected {self.dim} coefficients, got {coeffs.shape[-1]}")
        return coeffs @ self.matrix(x, d).T

    @property
    def label(self):
        return "{" + ", ".join(f.label for f in self.basis) + "}"


# ---------------------------------------------------------------- operators

@dataclass(frozen=True)
class OperatorSpec:
    """form H1 or H2; D(u) = sum b_k u^k; R(u) = sum c_k u^k (c_0 first)."""

    form: str
    d_coeffs: tuple
    r_coeffs: tuple
    delta: tuple = (0.0,)

    def __post_init__(self):
        if self.form not in ("H1", "H2"):
            raise ValidationError(f"form must be H1 or H2, got {self.form!r}")
        object.__setattr__(self, "d_coeffs", tuple(float(v) for v in self.d_coeffs))
        object.__setattr__(self, "r_coeffs", tuple(float(v) for v in self.r_coeffs))
        object.__setattr__(self, "delta", tuple(float(v) for v in np.atleast_1d(self.delta)))
        if not self.d_coeffs:
            raise ValidationError("d_coeffs must be non-empty")

    def D(self, u):
        return np.polynomial.polynomial.polyval(u, self.d_coeffs)

    def D_u(self, u):
        if len(self.d_coeffs) == 1:
            return np.zeros_like(u)
        return np.polynomial.polynomial.polyval(
            u, np.polynomial.polynomial.polyder(self.d_coeffs))

    def R(self, u):
        if not self.r_coeffs:
            return np.zeros_like(u)
        return np.polynomial.polynomial.polyval(u, self.r_coeffs)

    def local(self, u, ux, uxx):
        """The delay-free part N[u] from pointwise values."""
        out = self.D(u) * uxx + self.R(u)
        if self.form == "H1":
            out = out + self.D_u(u) * ux * ux
        return out

    def with_(self, **kw):
        d = dict(form=self.form, d_coeffs=self.d_coeffs, r_coeffs=self.r_coeffs,
                 delta=self.delta)
        d.update(kw)
        return OperatorSpec(**d)


def apply_operator(op: OperatorSpec, coeffs, delayed_coeffs, subspace: Subspace, x):
    """H[u, ubar_1, ...](x) with u = sum coeffs_i phi_i and ubar_j likewise.

    ``coeffs`` may carry leading batch dimensions (..., n); ``delayed_coeffs``
    then has shape (m, ..., n) for m delays.
    """
    coeffs = np.asarray(coeffs, dtype=np.float64)
    delayed = np.asarray(delayed_coeffs, dtype=np.float64)
    if coeffs.shape[-1] != subspace.dim:
        raise DimensionError("coeffs length must equal the basis size")
    if delayed.shape[0] != len(op.delta) or delayed.shape[1:] != coeffs.shape:
        raise DimensionError(
            f"delayed_coeffs must have shape ({len(op.delta)},) + {coeffs.shape}")
    u = subspace.combine(coeffs, x, 0)
    ux = subspace.combine(coeffs, x, 1)
    uxx = subspace.combine(coeffs, x, 2)
    out = op.local(u, ux, uxx)
    for d, c in zip(op.delta, delayed):
        if d != 0.0:
            out = out + d * subspace.combine(c, x, 0)
    return out


# ---------------------------------------------------------------- invariance

def chebyshev_grid(npts, interval):
    a, b = interval
    k = np.arange(npts)
    return 0.5 * (a + b) - 0.5 * (b - a) * np.cos((2 * k + 1) * np.pi / (2 * npts))


def sample_grid(subspace: Subspace, interval=DEFAULT_INTERVAL, max_shifts=5):
    """8n Chebyshev points; the interval is shifted right if the sampled basis
    matrix is ill-conditioned."""
    a, b = interval
    width = b - a
    cond = np.inf
    for _ in range(max_shifts + 1):
        x = chebyshev_grid(8 * subspace.dim, (a, b))
        B = subspace.matrix(x)
        cond = np.linalg.cond(B)
        if cond <= COND_LIMIT:
            return x, B, cond, (a, b)
        a, b = a + 0.5 * width, b + 0.5 * width
    raise IllConditionedBasisError(
        f"basis {subspace.label} ill-conditioned on every tried interval "
        f"(cond={cond:.3g})", cond=cond)


@dataclass
class InvarianceReport:
    entry_id: str
    residual: float
    tol: float
    invariant: bool
    trials: int
    cond: float
    interval: tuple
    thetas: list = field(repr=False, default_factory=list)

    CSV_HEADER = "entry,residual,verdict,trials,cond,x0,x1"

    def csv_row(self):
        verdict = "invariant" if self.invariant else "not-invariant"
        return (f"{self.entry_id},{self.residual:.17g},{verdict},{self.trials},"
                f"{self.cond:.17g},{self.interval[0]:.17g},{self.interval[1]:.17g}")


def check_invariance(op: OperatorSpec, subspace: Subspace, trials: int = 20,
                     tol: float = 1e-9, seed: int = DEFAULT_SEED,
                     interval=DEFAULT_INTERVAL, entry_id: str = "") -> InvarianceReport:
    """Max relative least-squares residual of H[u, ubar] over random u, ubar in W.

    Per trial the fitted coefficients (Theta_i(A) + sum_j delta_j Abar_ji) are
    kept in ``thetas``.
    """
    if trials < 10:
        raise ValidationError("check_invariance needs at least 10 trials")
    x, B, cond, used = sample_grid(subspace, interval)
    rng = np.random.default_rng(seed)
    n = subspace.dim
    worst = 0.0
    thetas = []
    for _ in range(trials):
        A = rng.uniform(-1, 1, n)
        Abar = rng.uniform(-1, 1, (len(op.delta), n))
        H = apply_operator(op, A, Abar, subspace, x)
        coef, *_ = np.linalg.lstsq(B, H, rcond=None)
        scale = np.max(np.abs(H))
        res = 0.0 if scale == 0 else np.max(np.abs(H - B @ coef)) / scale
        worst = max(worst, res)
        thetas.append(coef)
    return InvarianceReport(entry_id, float(worst), tol, bool(worst < tol), trials,
                            float(cond), used, thetas)


def theta_function(op: OperatorSpec, subspace: Subspace, interval=DEFAULT_INTERVAL):
    """Theta(A): coordinates of the delay-free image N[sum A_i phi_i]."""
    x, B, _, _ = sample_grid(subspace, interval)
    pinv = np.linalg.pinv(B)
    Phi = [subspace.matrix(x, d) for d in range(3)]

    def theta(A):
        A = np.asarray(A, dtype=np.float64)
        u, ux, uxx = (A @ P.T for P in Phi)
        return pinv @ op.local(u, ux, uxx)

    return theta


def affine_theta(op: OperatorSpec, subspace: Subspace, seed=DEFAULT_SEED, tol=1e-9):
    """(M, c) with Theta(A) = M A + c if Theta is affine, else None.

    Affinity is tested through second differences
    Theta(A + B) - Theta(A) - Theta(B) + Theta(0) on random pairs.
    """
    theta = theta_function(op, subspace)
    n = subspace.dim
    c = theta(np.zeros(n))
    M = np.column_stack([theta(e) - c for e in np.eye(n)])
    rng = np.random.default_rng(seed)
    scale = max(1.0, np.max(np.abs(M)), np.max(np.abs(c)))
    for _ in range(10):
        A, Bv = rng.uniform(-1, 1, (2, n))
        dd = theta(A + Bv) - theta(A) - theta(Bv) + c
        if np.max(np.abs(dd)) > tol * scale:
            return None
    return M, c


def reduce_to_fdde(op: OperatorSpec, subspace: Subspace, alpha: float, taus, histories,
                   seed=DEFAULT_SEED):
    """Coefficient equations d^a A_j = Theta_j(A) + sum_i delta_i A_j(t - tau_i).

    Affine and decoupled Theta (diagonal M) gives one DelaySeriesProblem
    per coefficient; anything else gives an OracleSystem.
    """
    taus = tuple(float(t) for t in np.atleast_1d(taus))
    if len(taus) != len(op.delta):
        raise ValidationError("one tau per delay coefficient is required")
    if len(histories) != subspace.dim:
        raise ValidationError("one history per basis function is required")
    delays = tuple(zip(taus, op.delta))
    aff = affine_theta(op, subspace, seed=seed)
    if aff is not None:
        M, c = aff
        scale = max(1.0, np.max(np.abs(M)))
        off = M - np.diag(np.diag(M))
        if np.max(np.abs(off), initial=0.0) <= 1e-9 * scale:
            lam = np.diag(M).copy()
            c = np.where(np.abs(c) <= 1e-12 * scale, 0.0, c)
            return [DelaySeriesProblem(alpha, float(lam[j]), float(c[j]), delays, histories[j])
                    for j in range(subspace.dim)]
    return OracleSystem(subspace.dim, theta_function(op, subspace), delays,
                        tuple(histories), alpha)


# ---------------------------------------------------------------- catalog

@dataclass(frozen=True)
class CatalogEntry:
    entry_id: str
    description: str
    constraint: str
    build: Callable      # params -> (OperatorSpec, Subspace)
    sample: Callable     # rng -> params
    perturb: Callable | None  # params -> params breaking the constraint
    tied: bool = False        # constraint ties c's to b's (sharpness applies)

    def instantiate(self, params=None, rng=None):
        if params is None:
            params = self.sample(rng if rng is not None else np.random.default_rng(DEFAULT_SEED))
        return self.build(params)


def _pm(rng, lo=0.5, hi=1.5):
    return float(rng.choice([-1.0, 1.0]) * rng.uniform(lo, hi))


def _base(rng, nd):
    return {"b": [_pm(rng) for _ in range(nd)], "c1": _pm(rng), "c0": _pm(rng, 0.2, 1.0),
            "delta": _pm(rng, 0.2, 1.0), "a0": float(rng.uniform(1.0, 2.0)),
            "a1": float(rng.uniform(1.0, 2.0))}


def _with(params, **kw):
    p = dict(params)
    p.update(kw)
    return p


def _scale_extra(params, key, factor):
    extra = dict(params.get("extra", {}))
    extra[key] = extra.get(key, 0.0) * factor
    return _with(params, extra=extra)


def _extra_r(params, r):
    """Apply additive/overriding perturbations stored under params['extra']."""
    r = list(r)
    for key, v in params.get("extra", {}).items():
        if key.startswith("c"):
            k = int(key[1:])
            r.extend([0.0] * (k + 1 - len(r)))
            r[k] = v
    return r


def _extra_d(params, d):
    d = list(d)
    for key, v in params.get("extra", {}).items():
        if key.startswith("b"):
            k = int(key[1:])
            d.extend([0.0] * (k + 1 - len(d)))
            d[k] = v
    return d


def _op(form, params, d, r):
    return OperatorSpec(form, _extra_d(params, d), _extra_r(params, r), (params["delta"],))


# -- nonlinear entries -----------------------------------------------------

def _exp1d(form):
    factor = (lambda k: k + 1) if form == "H1" else (lambda k: 1)

    def build(p):
        a0, b = p["a0"], p["b"]
        r = [0.0, p["c1"]] + [-factor(k) * a0 ** 2 * b[k] for k in range(1, len(b))]
        return _op(form, p, b, r), Subspace([Exponential(-a0)])

    def perturb(p):
        b, a0 = p["b"], p["a0"]
        return _with(p, extra={"c2": -1.1 * factor(1) * a0 ** 2 * b[1]})

    sample = lambda rng: _base(rng, 3)
    txt = ("c_{k+1} = -(k+1) a0^2 b_k" if form == "H1" else "c_{k+1} = -a0^2 b_k")
    return build, sample, perturb, txt


def _exp2d(form):
    f = 2.0 if form == "H1" else 1.0

    def build(p):
        a1, (b0, b1) = p["a1"], p["b"]
        r = [p["c0"], p["c1"], -f * a1 ** 2 * b1]
        return _op(form, p, [b0, b1], r), Subspace([Monomial(0), Exponential(-a1)])

    def perturb(p):
        return _with(p, extra={"c2": -1.1 * f * p["a1"] ** 2 * p["b"][1]})

    return build, lambda rng: _base(rng, 2), perturb, f"c2 = -{f:g} a1^2 b1"


def _poly(form, nd, dim, perturb_key):
    def build(p):
        return (_op(form, p, p["b"], [p["c0"], p["c1"]]),
                Subspace([Monomial(k) for k in range(dim)]))

    def perturb(p):
        if perturb_key == "c2":
            return _with(p, extra={"c2": 0.1 * p["c1"]})
        k = int(perturb_key[1:])
        return _with(p, extra={perturb_key: 0.1 * p["b"][k - 1]})

    return build, lambda rng: _base(rng, nd), perturb, f"D of degree <= {nd - 1}, R affine"


def _h1_trig2d():
    def build(p):
        a0, (b0, b2) = p["a0"], p["b"]
        k = math.sqrt(a0)
        return (_op("H1", p, [b0, 0.0, b2], [0.0, p["c1"], 0.0, 3 * a0 * b2]),
                Subspace([Cosine(k), Sine(k)]))

    def perturb(p):
        return _with(p, extra={"c3": 1.1 * 3 * p["a0"] * p["b"][1]})

    return build, lambda rng: _base(rng, 2), perturb, "c3 = 3 a0 b2"


def _trig3d(form):
    f = 2.0 if form == "H1" else 1.0

    def build(p):
        a1, (b0, b1) = p["a1"], p["b"]
        k = math.sqrt(a1)
        return (_op(form, p, [b0, b1], [p["c0"], p["c1"], f * a1 * b1]),
                Subspace([Monomial(0), Cosine(k), Sine(k)]))

    def perturb(p):
        return _with(p, extra={"c2": 1.1 * f * p["a1"] * p["b"][1]})

    return build, lambda rng: _base(rng, 2), perturb, f"c2 = {f:g} a1 b1"


def _h2_trig2d(variant):
    def build(p):
        a0 = p["a0"]
        k = math.sqrt(a0)
        if variant == "i":
            b0, b1, b2 = p["b"]
            d, r = [b0, b1, b2], [0.0, p["c1"], b1 * a0, a0 * b2]
        else:
            b0, b1 = p["b"]
            d, r = [b0, b1], [0.0, p["c1"], b1 * a0]
        return _op("H2", p, d, r), Subspace([Cosine(k), Sine(k)])

    def perturb(p):
        if variant == "i":
            return _with(p, extra={"c3": 1.1 * p["a0"] * p["b"][2]})
        return _with(p, extra={"c2": 1.1 * p["a0"] * p["b"][1]})

    nd = 3 if variant == "i" else 2
    txt = "c3 = a0 b2, c2 = a0 b1" if variant == "i" else "c2 = a0 b1"
    return build, lambda rng: _base(rng, nd), perturb, txt


# -- linear families -------------------------------------------------------

def _family_basis(family, p, with_one):
    npoly = p["npoly"]
    basis = [Monomial(0)] if with_one else []
    poly = [Monomial(k) for k in range(1, npoly + 1)]
    expo = [Exponential(v) for v in p["nu"]]
    trig = []
    for kap, om in zip(p["kappa"], p["omega"]):
        trig += [Cosine(kap), Sine(om)]
    etrig = []
    for mu, kap in zip(p["mu"], p["kappa"]):
        etrig += [ExpCosine(mu, kap), ExpSine(mu, kap)]
    parts = {1: [poly], 2: [expo], 3: [trig], 4: [poly, expo], 5: [poly, trig],
             6: [expo, trig], 7: [poly, expo, trig], 8: [etrig], 9: [poly, etrig],
             10: [poly, expo, etrig]}[family]
    for part in parts:
        basis += part
    return Subspace(basis)


def _linear_family(case, family):
    with_one = case == "i"

    def sample(rng):
        p = _base(rng, 1)
        n = 2
        p["npoly"] = n if with_one else 1
        p["nu"] = [float(v) for v in rng.permutation([-1.0, 1.0, 2.0])[:n]]
        half = n // 2
        p["kappa"] = [float(v) for v in rng.choice([1.0, 2.0], half)]
        p["omega"] = [float(v) for v in rng.choice([1.0, 2.0], half)]
        p["mu"] = [float(v) for v in rng.choice([-1.0, 1.0], half)]
        if not with_one:
            p["c0"] = 0.0
        return p

    def build(p):
        r = [p["c0"] if with_one else 0.0, p["c1"]]
        return _op("H1", p, [p["b"][0]], r), _family_basis(family, p, with_one)

    txt = "D = b0, R = c1 u + delta ubar" + (" + c0" if with_one else "")
    return build, sample, None, txt


_SPAN_TEXT = {
    1: "{1?, x..x^n}", 2: "{1?, e^(nu_i x)}", 3: "{1?, cos(kappa_i x), sin(omega_i x)}",
    4: "{1?, x..x^n, e^(nu_i x)}", 5: "{1?, x..x^n, cos, sin}", 6: "{1?, e^(nu_i x), cos, sin}",
    7: "{1?, x..x^n, e^(nu_i x), cos, sin}", 8: "{1?, e^(mu x)cos(kappa x), e^(mu x)sin(kappa x)}",
    9: "{1?, x..x^n, e^(mu x)cos, e^(mu x)sin}", 10: "{1?, x..x^n, e^(nu x), e^(mu x)cos, e^(mu x)sin}",
}


def catalog():
    """Every (operator, subspace) template of the classification."""
    rows = [
        ("H1/exp1d", "H1, W1 = {e^(-a0 x)}, D of degree n", _exp1d("H1")),
        ("H1/exp2d", "H1, W2 = {1, e^(-a1 x)}, D = b1 u + b0", _exp2d("H1")),
        ("H1/poly2d-i", "H1, W2 = {1, x}, D = b1 u + b0", _poly("H1", 2, 2, "c2")),
        ("H1/poly2d-ii", "H1, W2 = {1, x}, D = b2 u^2 + b1 u + b0", _poly("H1", 3, 2, "b3")),
        ("H1/poly3d", "H1, W3 = {1, x, x^2}, D = b1 u + b0", _poly("H1", 2, 3, "b2")),
        ("H1/trig2d", "H1, W2 = {cos(sqrt(a0) x), sin(sqrt(a0) x)}, D = b2 u^2 + b0", _h1_trig2d()),
        ("H1/trig3d", "H1, W3 = {1, cos(sqrt(a1) x), sin(sqrt(a1) x)}, D = b1 u + b0", _trig3d("H1")),
        ("H2/exp1d", "H2, W1 = {e^(-a0 x)}, D of degree n", _exp1d("H2")),
        ("H2/exp2d", "H2, W2 = {1, e^(-a1 x)}, D = b1 u + b0", _exp2d("H2")),
        ("H2/poly2d-i", "H2, W2 = {1, x}, D = b1 u + b0", _poly("H2", 2, 2, "c2")),
        ("H2/poly2d-ii", "H2, W2 = {1, x}, D = b2 u^2 + b1 u + b0", _poly("H2", 3, 2, "c2")),
        ("H2/poly2d-iii", "H2, W2 = {1, x}, D cubic", _poly("H2", 4, 2, "c2")),
        ("H2/poly2d-iv", "H2, W2 = {1, x}, D arbitrary (degree 5 sample)", _poly("H2", 6, 2, "c2")),
        ("H2/poly3d", "H2, W3 = {1, x, x^2}, D = b1 u + b0", _poly("H2", 2, 3, "b2")),
        ("H2/trig2d-i", "H2, W2 = {cos(sqrt(a0) x), sin(sqrt(a0) x)}, D quadratic", _h2_trig2d("i")),
        ("H2/trig2d-ii", "H2, W2 = {cos(sqrt(a0) x), sin(sqrt(a0) x)}, D = b1 u + b0", _h2_trig2d("ii")),
        ("H2/trig3d", "H2, W3 = {1, cos(sqrt(a1) x), sin(sqrt(a1) x)}, D = b1 u + b0", _trig3d("H2")),
    ]
    for case in ("i", "ii"):
        for fam in range(1, 11):
            span = _SPAN_TEXT[fam].replace("1?, ", "1, " if case == "i" else "")
            rows.append((f"linear-{case}/family{fam}", f"linear operator, case ({case}), W = {span}",
                         _linear_family(case, fam)))
    tied = {"exp1d", "exp2d", "trig2d", "trig2d-i", "trig2d-ii", "trig3d"}
    return [CatalogEntry(eid, desc, txt, build, sample, perturb,
                         tied=eid.split("/")[1] in tied and not eid.startswith("linear"))
            for eid, desc, (build, sample, perturb, txt) in rows]


def catalog_entry(entry_id):
    for e in catalog():
        if e.entry_id == entry_id:
            return e
    raise ValidationError(f"unknown catalog entry {entry_id!r}")
