import math

import numpy as np
import pytest

from fracdelay.delay_series import DelaySeriesProblem, HistoryFunction
from fracdelay.errors import (DomainError, OracleDivergenceError, StepIncompatibleError,
                              ValidationError)
from fracdelay.oracle import (OracleSystem, Trajectory, compatible_step, method_of_steps,
                              solve_fdde, system_from_problem)
from fracdelay.special import ml_two


def scalar(alpha, lam, delays, hist, c0=0.0):
    return system_from_problem(DelaySeriesProblem(alpha, lam, c0, delays, hist))


def test_no_delay_matches_mittag_leffler():
    one = HistoryFunction.constant(1.0, 1.0)
    sys0 = OracleSystem(1, lambda A: -A, (), (one,), 0.5)
    tr = solve_fdde(sys0, 2.0, 1 / 512)
    exact = ml_two(0.5, 1.0, -np.sqrt(tr.t))
    late = tr.t >= 0.1
    assert np.max(np.abs(tr.values[late, 0] - exact[late])) < 1e-4
    # the t^alpha onset limits the first few nodes only
    assert np.max(np.abs(tr.values[:, 0] - exact)) < 5e-4


def test_alpha_one_against_method_of_steps():
    sysm = scalar(1.0, 0.0, ((1.0, 1.0),), HistoryFunction.constant(1.0, 1.0))
    tr = solve_fdde(sysm, 2.0, 1 / 512)
    ms = method_of_steps(sysm, 2.0, t_eval=tr.t)
    assert np.max(np.abs(tr.values - ms.values)) < 1e-6


def test_method_of_steps_examples():
    sysm = scalar(1.0, 0.0, ((1.0, 1.0),), HistoryFunction.constant(1.0, 1.0))
    tr = method_of_steps(sysm, 2.0, t_eval=[1.0, 2.0])
    np.testing.assert_allclose(tr.values[:, 0], [2.0, 3.5], rtol=1e-10)
    t = np.linspace(1, 2, 11)
    np.testing.assert_allclose(method_of_steps(sysm, 2.0, t_eval=t).values[:, 0],
                               2 + (t - 1) + (t - 1) ** 2 / 2, rtol=1e-10)
    plain = scalar(1.0, -0.7, ((1.0, 0.0),), HistoryFunction.constant(1.0, 1.0))
    t = np.linspace(0, 3, 13)
    np.testing.assert_allclose(method_of_steps(plain, 3.0, t_eval=t).values[:, 0],
                               np.exp(-0.7 * t), rtol=1e-10)


def test_method_of_steps_requires_alpha_one():
    with pytest.raises(DomainError):
        method_of_steps(scalar(0.5, 0.0, ((1.0, 1.0),), HistoryFunction.constant(1.0, 1.0)), 1.0)


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.8])
def test_two_delay_self_convergence(alpha):
    sysm = scalar(alpha, -1.0, ((0.7, 0.3), (1.0, 0.2)), HistoryFunction.constant(1.0, 1.0))
    times = [0.35, 1.2, 1.85]
    vals = []
    for h in (1 / 80, 1 / 160, 1 / 320, 1 / 640):
        tr = solve_fdde(sysm, 2.0, h)
        vals.append(tr.values[[int(round(s / h)) for s in times], 0])
    diffs = [np.max(np.abs(a - b)) for a, b in zip(vals, vals[1:])]
    factor = 0.7 * 2 ** min(2.0, 1 + alpha)
    assert all(a / b >= factor for a, b in zip(diffs, diffs[1:]))
    assert diffs[-1] < 1e-4


def test_zero_delta_same_code_path():
    one = HistoryFunction.constant(1.0, 1.0)
    with_delay = scalar(0.6, -1.0, ((0.5, 0.0),), one, c0=0.3)
    no_delay = OracleSystem(1, lambda A: -1.0 * A + 0.3, (), (one,), 0.6)
    a = solve_fdde(with_delay, 1.5, 1 / 64).values
    b = solve_fdde(no_delay, 1.5, 1 / 64).values
    assert np.array_equal(a, b)


def test_step_compatibility():
    sysm = scalar(0.5, -1.0, ((0.7, 0.3),), HistoryFunction.constant(1.0, 1.0))
    with pytest.raises(StepIncompatibleError):
        solve_fdde(sysm, 1.0, 1 / 64)
    h = compatible_step(1 / 64, [0.7, 1.0])
    assert h <= 1 / 64
    for tau in (0.7, 1.0):
        assert abs(round(tau / h) * h - tau) < 1e-12
    assert compatible_step(0.3, [1.0]) == 0.25
    with pytest.raises(DomainError):
        solve_fdde(sysm, 0.01, 0.1)


def test_divergence_guard():
    sysm = OracleSystem(1, lambda A: 200.0 * A, ((0.5, 1.0),),
                        (HistoryFunction.constant(1.0, 0.5),), 1.0)
    with pytest.raises(OracleDivergenceError):
        solve_fdde(sysm, 1.0, 1 / 64)


def test_system_validation():
    one = HistoryFunction.constant(1.0, 1.0)
    with pytest.raises(DomainError):
        OracleSystem(1, lambda A: A, ((0.0, 1.0),), (one,), 0.5)
    with pytest.raises(DomainError):
        OracleSystem(1, lambda A: A, (), (one,), 1.2)
    with pytest.raises(ValidationError):
        OracleSystem(2, lambda A: A, (), (one,), 0.5)


@pytest.mark.parametrize("alpha", [0.5, 1.0])
def test_continuity_at_breakpoints(alpha):
    sysm = scalar(alpha, -1.0, ((0.5, 0.8),), HistoryFunction.polynomial([1.0, 2.0], 0.5))
    for h in (1 / 128, 1 / 256):
        tr = solve_fdde(sysm, 1.5, h)
        jumps = np.abs(np.diff(tr.values[:, 0]))
        # node-to-node change is O(h^alpha) near onsets and O(h) elsewhere
        assert jumps.max() < 3 * h ** alpha
        for bp in (0.5, 1.0):
            n = int(round(bp / h))
            assert jumps[n - 1] < 3 * h and jumps[n] < 3 * h


def test_vector_system():
    hists = (HistoryFunction.constant(1.0, 1.0), HistoryFunction.constant(0.5, 1.0))
    theta = lambda A: np.array([-A[0] + 0.5 * A[1], -2.0 * A[1]])
    sysm = OracleSystem(2, theta, ((1.0, (0.3, 0.1)),), hists, 1.0)
    tr = solve_fdde(sysm, 2.0, 1 / 256)
    ms = method_of_steps(sysm, 2.0, t_eval=tr.t)
    assert tr.values.shape == (tr.t.shape[0], 2)
    assert np.max(np.abs(tr.values - ms.values)) < 1e-5


def test_trajectory_csv(tmp_path):
    tr = Trajectory(np.array([0.0, 0.5]), np.array([[1.0, 2.0], [1 / 3, math.pi]]))
    text = tr.to_csv()
    lines = text.splitlines()
    assert lines[0] == "t,A1,A2"
    assert float(lines[2].split(",")[1]) == 1 / 3
    tr.to_csv(tmp_path / "traj.csv")
    assert (tmp_path / "traj.csv").read_text() == text
