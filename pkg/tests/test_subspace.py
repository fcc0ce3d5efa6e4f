import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracdelay.delay_series import DelaySeriesProblem, HistoryFunction
from fracdelay.errors import DimensionError, IllConditionedBasisError, ValidationError
from fracdelay.oracle import OracleSystem
from fracdelay.subspace import (COND_LIMIT, Cosine, ExpCosine, ExpSine, Exponential,
                                InvarianceReport, Monomial, OperatorSpec, Sine, Subspace,
                                affine_theta, apply_operator, catalog, catalog_entry,
                                check_invariance, reduce_to_fdde, sample_grid,
                                theta_function)

BASES = [Monomial(0), Monomial(1), Monomial(3), Exponential(-1.3), Exponential(2.0),
         Cosine(1.7), Sine(0.6), ExpCosine(-0.4, 2.0), ExpSine(0.8, 1.5)]


@pytest.mark.parametrize("phi", BASES, ids=lambda b: b.label)
def test_basis_derivatives_match_finite_differences(phi):
    x = np.linspace(0.2, 1.8, 9)
    h = 1e-4
    for d in (1, 2):
        fd = (phi.eval(x + h, d - 1) - phi.eval(x - h, d - 1)) / (2 * h)
        np.testing.assert_allclose(phi.eval(x, d), fd, rtol=1e-6, atol=1e-7)


def test_monomial_validation():
    with pytest.raises(ValidationError):
        Monomial(-1)
    with pytest.raises(ValidationError):
        Monomial(1.5)
    assert Monomial(2.0).k == 2
    np.testing.assert_array_equal(Monomial(1).eval(np.ones(3), 2), 0.0)


def test_operator_validation():
    with pytest.raises(ValidationError):
        OperatorSpec("H3", [1.0], [0.0])
    with pytest.raises(ValidationError):
        OperatorSpec("H1", [], [0.0])


# ---------------------------------------------------------------- apply_operator

def test_apply_linear_polynomial_example():
    b0, c1, c0, delta = 0.7, -1.2, 0.4, 0.3
    op = OperatorSpec("H1", [b0], [c0, c1], (delta,))
    W = Subspace([Monomial(0), Monomial(1)])
    x = np.linspace(0, 2, 7)
    ubar = np.array([0.5, -2.0])
    got = apply_operator(op, [1.0, 1.0], [ubar], W, x)
    np.testing.assert_allclose(got, c1 * (1 + x) + delta * (0.5 - 2 * x) + c0, rtol=1e-14)


def test_apply_exponential_example():
    a0, b, c1, delta = 1.3, [0.8, 0.5, 0.25], -0.6, 0.4
    r = [0.0, c1] + [-(k + 1) * a0 ** 2 * b[k] for k in range(1, 3)]
    op = OperatorSpec("H1", b, r, (delta,))
    W = Subspace([Exponential(a0)])
    x = np.linspace(0.1, 1.5, 8)
    A, Ab = 0.7, -0.9
    got = apply_operator(op, [A], [[Ab]], W, x)
    want = (a0 ** 2 * b[0] + c1) * A * np.exp(a0 * x) + delta * Ab * np.exp(a0 * x)
    np.testing.assert_allclose(got, want, rtol=1e-12)


def test_apply_h1_adds_gradient_term():
    W = Subspace([Monomial(0), Monomial(1)])
    x = np.array([0.3, 1.1])
    h1 = apply_operator(OperatorSpec("H1", [1.0, 2.0], [0.0]), [1.0, 3.0], [[0, 0]], W, x)
    h2 = apply_operator(OperatorSpec("H2", [1.0, 2.0], [0.0]), [1.0, 3.0], [[0, 0]], W, x)
    np.testing.assert_allclose(h1 - h2, 2.0 * 9.0, rtol=1e-14)


def test_apply_dimension_errors():
    op = OperatorSpec("H2", [1.0], [0.0, 1.0], (0.5,))
    W = Subspace([Monomial(0), Monomial(1)])
    with pytest.raises(DimensionError):
        apply_operator(op, [1.0, 2.0, 3.0], [[0, 0, 0]], W, 0.5)
    with pytest.raises(DimensionError):
        apply_operator(op, [1.0, 2.0], [[0, 0], [0, 0]], W, 0.5)


def test_apply_batched():
    op = OperatorSpec("H2", [1.0, 0.5], [0.1, -1.0, 0.5], (0.3, 0.2))
    W = Subspace([Monomial(0), Cosine(1.0), Sine(1.0)])
    rng = np.random.default_rng(3)
    A = rng.uniform(-1, 1, (4, 3))
    Ab = rng.uniform(-1, 1, (2, 4, 3))
    x = 0.7
    batch = apply_operator(op, A, Ab, W, x)
    single = [apply_operator(op, A[i], Ab[:, i], W, x) for i in range(4)]
    np.testing.assert_allclose(batch, single, rtol=1e-14)


# ---------------------------------------------------------------- check_invariance

def test_h1_two_dim_exponential_invariant():
    a1, b0, b1, c1, c0 = 1.4, 0.9, 0.6, -0.8, 0.3
    op = OperatorSpec("H1", [b0, b1], [c0, c1, -2 * a1 ** 2 * b1], (0.5,))
    rep = check_invariance(op, Subspace([Monomial(0), Exponential(-a1)]))
    assert rep.invariant and rep.residual < 1e-9


def _h2_trig(a0=1.5, b=(0.8, 0.6, 0.4), c1=-0.7, bump=0.0):
    b0, b1, b2 = b
    k = math.sqrt(a0)
    op = OperatorSpec("H2", [b0, b1, b2], [0.0, c1, b1 * a0, a0 * b2 + bump], (0.5,))
    return op, Subspace([Cosine(k), Sine(k)])


def test_h2_trig_invariant_and_perturbed():
    rep = check_invariance(*_h2_trig())
    assert rep.invariant
    bad = check_invariance(*_h2_trig(bump=0.1))
    assert not bad.invariant
    assert bad.residual > 1e3 * bad.tol


def test_check_invariance_needs_ten_trials():
    with pytest.raises(ValidationError):
        check_invariance(*_h2_trig(), trials=9)


def test_report_is_reproducible_and_serializable():
    a = check_invariance(*_h2_trig(), entry_id="x")
    b = check_invariance(*_h2_trig(), entry_id="x")
    assert a.csv_row() == b.csv_row()
    assert len(a.thetas) == a.trials
    fields = a.csv_row().split(",")
    assert len(fields) == len(InvarianceReport.CSV_HEADER.split(","))
    assert fields[2] == "invariant"


def test_ill_conditioned_basis():
    W = Subspace([Exponential(1.0), Exponential(1.0 + 1e-10)])
    with pytest.raises(IllConditionedBasisError) as exc:
        sample_grid(W)
    assert exc.value.cond > COND_LIMIT


def test_interval_shift_when_ill_conditioned():
    # cos(x) is nearly constant next to 0; moving right separates it from 1
    W = Subspace([Monomial(0), Cosine(1.0)])
    x, B, cond, used = sample_grid(W, (0.0, 2e-4))
    assert cond <= COND_LIMIT
    assert used[0] > 0.0 and used[1] - used[0] == pytest.approx(2e-4)
    assert x.min() >= used[0] and x.max() <= used[1]


# ---------------------------------------------------------------- catalog

def test_catalog_size_and_ids():
    entries = catalog()
    assert len(entries) >= 20
    ids = [e.entry_id for e in entries]
    assert len(set(ids)) == len(ids)
    assert catalog_entry("H2/trig3d").entry_id == "H2/trig3d"
    with pytest.raises(ValidationError):
        catalog_entry("nope")


@pytest.mark.parametrize("entry", catalog(), ids=lambda e: e.entry_id)
def test_catalog_entry_invariant_at_random_points(entry):
    rng = np.random.default_rng(hash(entry.entry_id) % 2 ** 32)
    for _ in range(5):
        op, W = entry.instantiate(rng=rng)
        rep = check_invariance(op, W, tol=1e-9)
        assert rep.invariant, (entry.entry_id, rep.residual)


@pytest.mark.parametrize("entry", [e for e in catalog() if e.tied], ids=lambda e: e.entry_id)
def test_tied_constraints_are_sharp(entry):
    rng = np.random.default_rng(7)
    for _ in range(5):
        p = entry.sample(rng)
        rep = check_invariance(*entry.build(entry.perturb(p)))
        assert rep.residual > 1e-3


def test_structural_perturbations_break_polynomial_entries():
    for eid in ("H1/poly2d-ii", "H1/poly3d", "H2/poly3d", "H2/poly2d-i"):
        e = catalog_entry(eid)
        p = e.sample(np.random.default_rng(1))
        assert not check_invariance(*e.build(e.perturb(p))).invariant


def test_catalog_spec_examples():
    e = catalog_entry("H1/exp1d")
    p = {"a0": 1.0, "b": [1.0, 0.5, 0.25], "c1": -0.5, "c0": 0.0, "delta": 0.3, "a1": 1.0}
    assert check_invariance(*e.build(p)).invariant
    # D cubic without any trigonometric part, R affine
    e = catalog_entry("H2/poly2d-iv")
    p = {"b": [1.0, -0.5, 0.3, 0.2, 0.0, 0.0], "c1": 0.7, "c0": 0.1, "delta": 0.4,
         "a0": 1.0, "a1": 1.0}
    assert check_invariance(*e.build(p)).invariant
    e = catalog_entry("linear-i/family3")
    p = {"b": [0.8], "c1": -0.4, "c0": 0.2, "delta": 0.5, "a0": 1.0, "a1": 1.0,
         "npoly": 2, "nu": [], "kappa": [2.0], "omega": [2.0], "mu": []}
    op, W = e.build(p)
    assert [b.label for b in W.basis][0] == "1" and W.dim == 3
    assert check_invariance(op, W).invariant


# ---------------------------------------------------------------- Theta and reduction

@pytest.mark.parametrize("eid", ["H1/exp1d", "H2/exp1d", "H1/trig3d", "H2/trig2d-ii",
                                 "linear-i/family1", "linear-ii/family8"])
def test_theta_consistency(eid):
    e = catalog_entry(eid)
    p = e.sample(np.random.default_rng(11))
    if "trig3d" in eid:
        p["b"][1] = 0.0
    op, W = e.build(p)
    aff = affine_theta(op, W)
    assert aff is not None
    M, c = aff
    rep = check_invariance(op, W, trials=20, seed=99)
    rng = np.random.default_rng(99)
    delta = np.array(op.delta)
    for fitted in rep.thetas:
        A = rng.uniform(-1, 1, W.dim)
        Ab = rng.uniform(-1, 1, (len(delta), W.dim))
        want = M @ A + c + delta @ Ab
        np.testing.assert_allclose(fitted, want, rtol=1e-9, atol=1e-9)


def test_projection_soundness():
    e = catalog_entry("linear-i/family7")
    op, W = e.instantiate(rng=np.random.default_rng(5))
    theta = theta_function(op, W)
    x, B, _, _ = sample_grid(W)
    rng = np.random.default_rng(6)
    for _ in range(10):
        A = rng.uniform(-1, 1, W.dim)
        u = W.combine(A, x)
        H = op.local(u, W.combine(A, x, 1), W.combine(A, x, 2))
        assert np.max(np.abs(B @ theta(A) - H)) / np.max(np.abs(H)) < 1e-11


def _hist(n):
    return [HistoryFunction.constant(1.0 + j, 1.0) for j in range(n)]


def test_reduce_exp1d():
    e = catalog_entry("H1/exp1d")
    p = {"a0": 1.2, "b": [0.7, 0.5, 0.3], "c1": -0.9, "c0": 0.0, "delta": 0.4, "a1": 1.0}
    probs = reduce_to_fdde(*e.build(p), 0.6, [1.0], _hist(1))
    assert len(probs) == 1 and isinstance(probs[0], DelaySeriesProblem)
    assert probs[0].lam == pytest.approx(1.2 ** 2 * 0.7 - 0.9, abs=1e-12)
    assert probs[0].c0 == 0.0 and probs[0].delays == ((1.0, 0.4),)


def test_reduce_trig3d_h1():
    e = catalog_entry("H1/trig3d")
    p = {"a1": 1.6, "b": [0.8, 0.0], "c1": 0.5, "c0": 0.2, "delta": 0.3, "a0": 1.0}
    probs = reduce_to_fdde(*e.build(p), 0.6, [1.0], _hist(3))
    assert len(probs) == 3
    assert probs[0].lam == pytest.approx(0.5, abs=1e-12)
    assert probs[0].c0 == pytest.approx(0.2, abs=1e-12)
    for pr in probs[1:]:
        assert pr.lam == pytest.approx(0.5 - 1.6 * 0.8, abs=1e-12)
        assert pr.c0 == 0.0


def test_reduce_trig2d_h2():
    e = catalog_entry("H2/trig2d-ii")
    p = {"a0": 2.0, "b": [0.6, 0.0], "c1": -0.3, "c0": 0.0, "delta": 0.3, "a1": 1.0}
    probs = reduce_to_fdde(*e.build(p), 0.6, [1.0], _hist(2))
    assert [pr.lam for pr in probs] == pytest.approx([-0.3 - 2.0 * 0.6] * 2, abs=1e-12)


def test_reduce_nonlinear_gives_oracle_system():
    e = catalog_entry("H1/trig2d")
    op, W = e.instantiate()
    out = reduce_to_fdde(op, W, 0.6, [1.0], _hist(2))
    assert isinstance(out, OracleSystem)
    # trig3d with b1 != 0 is invariant but not affine
    e = catalog_entry("H1/trig3d")
    p = {"a1": 1.6, "b": [0.8, 0.4], "c1": 0.5, "c0": 0.2, "delta": 0.3, "a0": 1.0}
    assert isinstance(reduce_to_fdde(*e.build(p), 0.6, [1.0], _hist(3)), OracleSystem)


def test_reduce_coupled_linear_gives_oracle_system():
    e = catalog_entry("linear-i/family1")
    op, W = e.instantiate()
    out = reduce_to_fdde(op, W, 0.6, [1.0], _hist(W.dim))
    assert isinstance(out, OracleSystem)
    # the oracle system's theta reproduces the operator image
    A = np.array([0.3, -0.2, 0.5])
    x = np.array([0.4, 1.3])
    H = op.local(W.combine(A, x), W.combine(A, x, 1), W.combine(A, x, 2))
    np.testing.assert_allclose(W.matrix(x) @ out.theta(A), H, rtol=1e-10)


def test_reduce_validation():
    e = catalog_entry("H1/exp1d")
    op, W = e.instantiate()
    with pytest.raises(ValidationError):
        reduce_to_fdde(op, W, 0.6, [1.0, 2.0], _hist(1))
    with pytest.raises(ValidationError):
        reduce_to_fdde(op, W, 0.6, [1.0], _hist(2))


@settings(max_examples=25, deadline=None)
@given(st.floats(0.5, 2.0), st.floats(-1.5, 1.5), st.floats(-1.5, 1.5), st.floats(-1, 1))
def test_h2_exp2d_invariant_for_any_parameters(a1, b0, b1, c1):
    op = OperatorSpec("H2", [b0, b1], [0.2, c1, -a1 ** 2 * b1], (0.4,))
    assert check_invariance(op, Subspace([Monomial(0), Exponential(-a1)])).residual < 1e-9
