import numpy as np
import pytest

from fracdelay.caputo import UniformGrid
from fracdelay.delay_series import DelaySeriesProblem, HistoryFunction
from fracdelay.errors import ConstraintError, ValidationError
from fracdelay.pde_verify import (DEFAULTS, NAMES, AssembledSolution, convergence_table,
                                  default_params, named_solution, pde_residual)
from fracdelay.subspace import Monomial, OperatorSpec, Subspace


def lams(sol):
    return [c.lam for c in sol.coefficients]


def test_seven_named_solutions():
    assert len(NAMES) == 7 and set(NAMES) == set(DEFAULTS)
    for name in NAMES:
        sol = named_solution(name)
        assert sol.subspace.dim == len(sol.coefficients)
        assert all(isinstance(c, DelaySeriesProblem) for c in sol.coefficients)


def test_exp1d_h1_rate():
    sol = named_solution("exp1d_H1", {"a0": 1.0, "b": [0.5], "c1": -1.0, "delta": [0.2],
                                      "tau": [1.0], "history": [[1.0]]})
    assert lams(sol) == pytest.approx([-0.5], abs=1e-15)
    assert sol.coefficients[0].delays == ((1.0, 0.2),)


def test_trig3d_h1_rates():
    sol = named_solution("trig3d_H1", {"a1": 1.0, "b": [1.0, 0.0], "c1": 0.5})
    assert lams(sol) == pytest.approx([0.5, -0.5, -0.5], abs=1e-15)
    assert [c.c0 for c in sol.coefficients] == [0.2, 0.0, 0.0]


def test_two_delay_rates():
    p = default_params("twodelay_trig_H2")
    sol = named_solution("twodelay_trig_H2")
    gam = p["c1"] - p["a0"] * p["b"][0]
    assert lams(sol) == pytest.approx([gam, gam], abs=1e-15)
    assert len(sol.coefficients[0].delays) == 2


def test_other_rates():
    p = default_params("trig2d_H2")
    assert lams(named_solution("trig2d_H2")) == pytest.approx([p["c1"] - p["a0"] * p["b"][0]] * 2)
    p = default_params("exp1d_H2")
    assert lams(named_solution("exp1d_H2")) == pytest.approx([p["a0"] ** 2 * p["b"][0] + p["c1"]])
    sol = named_solution("poly2d_H1")
    assert lams(sol) == pytest.approx([-1.0, -1.0]) and sol.coefficients[0].c0 == 0.5


def test_constraint_violations():
    with pytest.raises(ConstraintError):
        named_solution("exp1d_H1", {"r": [0.0, -1.0, -0.3]})       # c2 should be -2 a0^2 b1
    with pytest.raises(ConstraintError):
        named_solution("trig3d_H1", {"b": [1.0, 0.4]})             # nonlinear reduction
    with pytest.raises(ValidationError):
        named_solution("exp1d_H1", {"bogus": 1})
    with pytest.raises(ValidationError):
        named_solution("nope")
    with pytest.raises(ValidationError):
        named_solution("poly2d_H1", {"history": [[1.0]]})
    with pytest.raises(ValidationError):
        named_solution("poly2d_H1", {"tau": [1.0, 2.0]})


@pytest.mark.parametrize("name", NAMES)
def test_history_match(name):
    sol = named_solution(name)
    x = np.linspace(0, 1, 5)
    t = np.linspace(-sol.tau_star, -1e-3, 17)
    p = sol.params["history"]
    want = np.column_stack([np.polynomial.polynomial.polyval(t, c) for c in p])
    np.testing.assert_allclose(sol.coefficient_values(t), want, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(sol(x, t), sol.history_field(x, t), rtol=1e-12, atol=1e-12)


def test_mode_decoupling():
    base = named_solution("poly2d_H1")
    hist = [list(h) for h in base.params["history"]]
    hist[1] = [3.0, 0.0, -2.0]
    other = named_solution("poly2d_H1", {"history": hist})
    t = np.linspace(0, 2, 41)
    a, b = base.coefficient_values(t), other.coefficient_values(t)
    assert np.array_equal(a[:, 0], b[:, 0])
    assert np.max(np.abs(a[:, 1] - b[:, 1])) > 0.1


def test_zero_solution_residual_vanishes():
    W = Subspace([Monomial(0), Monomial(1)])
    op = OperatorSpec("H2", [1.0, 0.5], [0.0, -1.0], (0.5,))
    zero = HistoryFunction.constant(0.0, 1.0)
    probs = tuple(DelaySeriesProblem(0.6, -1.0, 0.0, ((1.0, 0.5),), zero) for _ in range(2))
    sol = AssembledSolution("zero", W, probs, op, (1.0,), 0.6)
    rep = pde_residual(sol, np.linspace(0, 1, 5), UniformGrid.covering(2.0, 1 / 64))
    assert rep.max_norm == 0.0 and rep.rms_norm == 0.0


def test_residual_window_and_shape():
    sol = named_solution("exp1d_H1")
    g = UniformGrid.covering(2.0, 1 / 64)
    rep = pde_residual(sol, np.linspace(0, 1, 6), g)
    assert rep.t[0] == pytest.approx(4 / 64)
    assert rep.field.shape == (6, rep.t.shape[0])
    assert rep.max_norm < 1e-2
    lines = rep.to_csv().splitlines()
    assert lines[0] == "x,t,residual" and len(lines) == 1 + rep.field.size
    with pytest.raises(ValidationError):
        pde_residual(sol, [0.0], UniformGrid(0.5, 1 / 64, 10))


def test_convergence_and_negative_control():
    sol = named_solution("poly2d_H2")
    tab = convergence_table(sol, hs=(1 / 64, 1 / 128, 1 / 256))
    assert tab.monotone
    assert min(tab.rates) >= 1.9 - sol.alpha - 0.2
    assert tab.max_norms[0] < 1e-2
    assert "h,max_norm,rms_norm,rate" in tab.summary()
    wrong = named_solution("poly2d_H2", lam_shift=0.1)
    bad = convergence_table(wrong, hs=(1 / 64, 1 / 128, 1 / 256))
    assert min(bad.max_norms) > 1e-2


def test_convergence_table_needs_nested_steps():
    with pytest.raises(ValidationError):
        convergence_table(named_solution("exp1d_H1"), hs=(1 / 64, 1 / 100))


def test_solution_validation():
    W = Subspace([Monomial(0)])
    op = OperatorSpec("H2", [1.0], [0.0])
    with pytest.raises(ValidationError):
        AssembledSolution("x", W, (), op, (1.0,), 0.5)
