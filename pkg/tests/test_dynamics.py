import math

import numpy as np
import pytest

from wmsindy.dynamics import (
    IntegrationError,
    KnownModel,
    SystemSpec,
    Trajectory,
    discrepancy_coefficients,
    eval_rhs,
    flow_map,
    get_system,
    rk4_step,
    rollout,
    simulate_truth,
)
from wmsindy.library import build_library, evaluate_library

ALL_SYSTEMS = ["lorenz", "rossler", "lorenz96", "vanderpol", "duffing", "cubic", "lotka", "lorenz_modified", "lorenz_known"]


def decay_system():
    return SystemSpec("decay", 1, {}, lambda x: -x, ({(1,): -1.0},), x0=(1.0,), t_total=1.0, max_degree=1)


@pytest.mark.parametrize(
    "name, x, expected",
    [
        ("lorenz", [5, 5, 25], [0.0, 10.0, 25.0 - 200.0 / 3.0]),
        ("rossler", [3, 5, 0], [-5.0, 4.0, 0.2]),
        ("vanderpol", [-2, 1], [1.0, 0.5]),
    ],
)
def test_rhs_hand_values(name, x, expected):
    np.testing.assert_allclose(eval_rhs(get_system(name), np.array(x, dtype=float)), expected, rtol=1e-14, atol=1e-14)


def test_rhs_rejects_wrong_dimension():
    with pytest.raises(ValueError):
        eval_rhs(get_system("lorenz"), np.zeros(2))
    with pytest.raises(ValueError):
        eval_rhs(get_system("lorenz"), np.array([np.nan, 0.0, 0.0]))


@pytest.mark.parametrize("name", ALL_SYSTEMS)
def test_rhs_matches_polynomial_coefficients(name, rng):
    system = get_system(name)
    spec = system.library()
    X = rng.normal(size=(50, system.D)) * 3
    np.testing.assert_allclose(evaluate_library(spec, X) @ system.true_coefficients(spec), system.rhs(X), rtol=1e-12, atol=1e-10)


@pytest.mark.parametrize(
    "name, params",
    [
        ("lorenz", {"sigma": 10.0, "rho": 28.0, "beta": 8.0 / 3.0}),
        ("rossler", {"a": 0.2, "b": 0.2, "c": 5.7}),
        ("lorenz96", {"F": 8.0, "S": 6}),
        ("vanderpol", {"mu": 0.5}),
        ("duffing", {"p1": 0.2, "p2": 0.1, "p3": 1.0}),
        ("cubic", {"p1": -0.1, "p2": 2.0, "p3": -2.0, "p4": -1.0}),
        ("lotka", {"p1": 1.0, "p2": 0.5}),
    ],
)
def test_preset_parameters(name, params):
    assert get_system(name).params == params


def test_lorenz96_cyclic_equivariance(rng):
    system = get_system("lorenz96")
    x = rng.normal(size=6) * 4
    np.testing.assert_allclose(system.rhs(np.roll(x, 1)), np.roll(system.rhs(x), 1), rtol=1e-14)


def test_unknown_system():
    with pytest.raises(ValueError, match="unknown system"):
        get_system("nope")


def test_decay_truth_matches_exponential():
    traj = simulate_truth(decay_system(), [1.0], 1.0, 0.01)
    assert abs(traj.states[100, 0] - math.exp(-1.0)) < 1e-9


def test_lorenz_truth_shape(lorenz_truth):
    assert lorenz_truth.N == 2501 and lorenz_truth.D == 3
    assert np.all(np.isfinite(lorenz_truth.states))
    np.testing.assert_allclose(lorenz_truth.times[[0, -1]], [0.0, 25.0])


def test_lorenz96_bounded():
    system = get_system("lorenz96")
    traj = simulate_truth(system, system.x0, 25.0, 0.01)
    assert np.abs(traj.states).max() < 20


def test_truth_is_deterministic():
    system = get_system("vanderpol")
    a = simulate_truth(system, system.x0, 2.0, 0.01)
    b = simulate_truth(system, system.x0, 2.0, 0.01)
    assert np.array_equal(a.states, b.states)


def test_blow_up_raises_with_last_time():
    system = SystemSpec("blowup", 1, {}, lambda x: x * x, ({(2,): 1.0},), max_degree=2)
    with pytest.raises(IntegrationError) as info:
        simulate_truth(system, [1.0], 2.0, 0.01)
    assert 0.0 < info.value.last_time <= 1.0


def test_truth_rejects_bad_inputs():
    with pytest.raises(ValueError):
        simulate_truth(get_system("lorenz"), [1.0, 2.0, 3.0], -1.0, 0.01)
    with pytest.raises(ValueError):
        simulate_truth(get_system("lorenz"), [1.0, 2.0], 1.0, 0.01)


def test_rk4_decay_step():
    assert abs(rk4_step(lambda x: -x, np.array([1.0]), 0.01)[0] - 0.990049834) < 1e-9


def test_rk4_zero_field_is_identity():
    x = np.array([1.5, -2.0])
    assert np.array_equal(rk4_step(np.zeros_like, x, 0.1), x)


def test_rk4_round_trip_linear():
    A = np.array([[0.0, 1.0], [-2.0, -0.3]])
    x = np.array([1.0, 0.5])
    for dt in (0.1, 0.05):
        back = rk4_step(lambda v: v @ A.T, rk4_step(lambda v: v @ A.T, x, -dt), dt)
        assert np.linalg.norm(back - x) < 10 * dt**5


def _decay_global_error(h, T=1.0):
    x = np.array([1.0])
    for _ in range(int(round(T / h))):
        x = rk4_step(lambda v: -v, x, h)
    return abs(x[0] - math.exp(-T))


@pytest.mark.parametrize("dt", [0.1, 0.05])
def test_rk4_global_order(dt):
    assert 14 <= _decay_global_error(dt) / _decay_global_error(dt / 2) <= 18


def test_flow_map_zero_field():
    spec = build_library(3, 2)
    x = np.array([1.0, -2.0, 3.0])
    for q in (1, 4):
        np.testing.assert_array_equal(flow_map(np.zeros((spec.J, 3)), spec, None, x, q, 0.01), x)


def test_flow_map_decay():
    spec = build_library(1, 1)
    out = flow_map(np.array([[-1.0]]), spec, None, np.array([1.0]), 2, 0.01)
    assert abs(out[0] - math.exp(-0.02)) < 1e-9


def test_flow_map_forward_backward(lorenz_short):
    system = get_system("lorenz")
    spec = system.library()
    xi = system.true_coefficients(spec)
    x = lorenz_short.states[50]
    fwd = flow_map(xi, spec, None, x, 3, 0.01, "forward")
    np.testing.assert_allclose(flow_map(xi, spec, None, fwd, 3, 0.01, "backward"), x, atol=1e-6)


def test_flow_map_validation():
    spec = build_library(1, 1)
    with pytest.raises(ValueError):
        flow_map(np.ones((1, 1)), spec, None, np.ones(1), 0, 0.01)
    with pytest.raises(ValueError):
        flow_map(np.ones((1, 1)), spec, None, np.ones(1), 1, 0.01, "sideways")


def test_rollout_marks_divergence():
    spec = build_library(1, 2)
    out = rollout(np.array([[0.0], [1.0]]), spec, None, np.array([5.0]), 500, 0.1)
    assert np.isnan(out[-1, 0]) and np.isfinite(out[0, 0])


def test_trajectory_csv_round_trip(tmp_path, lorenz_short):
    path = tmp_path / "traj.csv"
    lorenz_short.to_csv(path)
    assert path.read_text().splitlines()[0] == "t,x1,x2,x3"
    back = Trajectory.from_csv(path)
    assert back.dt == pytest.approx(0.01)
    assert np.array_equal(back.states, lorenz_short.states)


def test_trajectory_invariants():
    with pytest.raises(ValueError):
        Trajectory(0.0, 0.01, np.ones((1, 2)))
    with pytest.raises(ValueError):
        Trajectory(0.0, -0.01, np.ones((5, 2)))
    with pytest.raises(ValueError):
        Trajectory(0.0, 0.01, np.array([[1.0], [np.inf]]))


def test_known_model_discrepancy():
    full = get_system("lorenz_modified")
    known = KnownModel.from_system(get_system("lorenz_known"))
    spec = full.library()
    missing = discrepancy_coefficients(full, known, spec)
    X = np.random.default_rng(0).normal(size=(20, 3)) * 5
    np.testing.assert_allclose(known(X) + evaluate_library(spec, X) @ missing, full.rhs(X), rtol=1e-12, atol=1e-9)
