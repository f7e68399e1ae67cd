import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from catpop.exact import chain_matrix, exact_state_distribution, total_variation
from catpop.model import (
    EventKind,
    ModelParams,
    OptimalPath,
    PathSample,
    SimSpec,
    chain_step,
    optimal_path,
    scale_path,
    simulate_decomposed,
    simulate_subordinated,
    sup_value,
    terminal_value,
)
from catpop.streams import replica_rng

P111 = ModelParams(1.0, 1.0, 1.0)


def _empty_path():
    return PathSample(
        np.empty(0), np.empty(0, dtype=np.uint8), np.empty(0, dtype=np.int64)
    )


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        ModelParams(1.0, -2.0, 1.0)
    with pytest.raises(ValueError):
        ModelParams(1.0, 1.0, math.inf)


def test_simspec_validation():
    with pytest.raises(ValueError):
        SimSpec(horizon_T=0.0, seed=1)
    with pytest.raises(ValueError):
        SimSpec(horizon_T=1.0, seed=-1)
    with pytest.raises(ValueError):
        SimSpec(horizon_T=1.0, seed=1, replica_index=-1)


def test_chain_step_from_zero_always_one():
    rng = replica_rng(0, 0)
    assert all(chain_step(0, P111, rng) == 1 for _ in range(200))


def test_chain_step_from_three_frequencies():
    # i=3, lam=mu=1: P(4)=1/2, P(0)=P(1)=P(2)=1/6
    rng = replica_rng(1, 0)
    n = 60_000
    counts = np.bincount([chain_step(3, P111, rng) for _ in range(n)], minlength=5)
    freq = counts / n
    assert abs(freq[4] - 0.5) < 0.01
    for j in range(3):
        assert abs(freq[j] - 1.0 / 6.0) < 0.01
    assert counts[3] == 0


def test_chain_step_matches_kernel_row():
    # empirical law of the inlined simulator step equals the kernel row
    params = ModelParams(2.0, 3.0, 1.0)
    row = chain_matrix(params, 12)[7]
    rng = replica_rng(2, 0)
    n = 60_000
    freq = np.bincount([chain_step(7, params, rng) for _ in range(n)], minlength=13) / n
    assert total_variation(freq, row) < 0.01


@pytest.mark.parametrize(
    "params",
    [P111, ModelParams(2.0, 3.0, 1.0), ModelParams(0.2, 5.0, 2.0),
     ModelParams(7.0, 0.5, 0.3), ModelParams(1.5, 1.5, 10.0)],
)
def test_kernel_normalization_to_200(params):
    P = chain_matrix(params, 250)
    sums = P[:201].sum(axis=1)
    assert np.all(np.abs(sums - 1.0) <= 1e-12)


def test_subordinated_zero_horizon_limit():
    path = simulate_subordinated(P111, SimSpec(horizon_T=1e-12, seed=3))
    assert path.n_events == 0
    assert terminal_value(path, 1e-12) == 0.0


def test_subordinated_event_count_mean():
    # Poisson clock: mean event count alpha*T to within 1%
    n, T = 100_000, 4.0
    total = 0
    for i in range(n):
        total += simulate_subordinated(P111, SimSpec(T, 17, i)).n_events
    assert abs(total / n - 4.0) < 0.04


def test_decomposed_stream_rates():
    # lam=1, mu=1, alpha=2: birth rate 1, catastrophe rate 1
    params = ModelParams(1.0, 1.0, 2.0)
    assert params.birth_rate == 1.0
    assert params.catastrophe_rate == 1.0
    n, T = 20_000, 5.0
    births = cats = 0
    for i in range(n):
        path = simulate_decomposed(params, SimSpec(T, 19, i))
        births += int(np.count_nonzero(path.kinds == EventKind.BIRTH))
        cats += int(np.count_nonzero(path.kinds == EventKind.CATASTROPHE))
    assert abs(births / n - 5.0) < 0.06
    assert abs(cats / n - 5.0) < 0.06


def test_catastrophe_from_one_lands_at_zero():
    seen = 0
    for i in range(3000):
        path = simulate_decomposed(P111, SimSpec(2.0, 23, i))
        prev = 0
        for kind, post in zip(path.kinds, path.post_states):
            if kind == EventKind.CATASTROPHE and prev == 1:
                assert post == 0
                seen += 1
            prev = post
    assert seen > 100


@pytest.mark.parametrize("simulate", [simulate_subordinated, simulate_decomposed])
def test_path_invariants(simulate):
    params = ModelParams(1.3, 0.8, 2.0)
    for i in range(500):
        path = simulate(params, SimSpec(3.0, 29, i))
        assert np.all(np.diff(path.times) > 0)
        assert np.all(path.times <= 3.0)
        assert np.all(path.post_states >= 0)
        if path.n_events == 0:
            continue
        assert path.times[0] > 0
        prev = np.concatenate(([0], path.post_states[:-1]))
        births = path.kinds == EventKind.BIRTH
        cats = ~births
        assert np.all(path.post_states[births & (prev > 0)] == prev[births & (prev > 0)] + 1)
        assert np.all(path.post_states[prev == 0] == 1)
        drop_ok = path.post_states[cats & (prev > 0)] < prev[cats & (prev > 0)]
        assert np.all(drop_ok)


@given(seed=st.integers(min_value=0, max_value=2**64 - 1),
       replica=st.integers(min_value=0, max_value=1000))
@settings(max_examples=25, deadline=None)
def test_determinism_byte_for_byte(seed, replica):
    spec = SimSpec(4.0, seed, replica)
    for simulate in (simulate_subordinated, simulate_decomposed):
        a = simulate(P111, spec)
        b = simulate(P111, spec)
        assert a.times.tobytes() == b.times.tobytes()
        assert a.kinds.tobytes() == b.kinds.tobytes()
        assert a.post_states.tobytes() == b.post_states.tobytes()


def test_construction_equivalence_quick():
    # desk-scale check; the full 1e6-replica version is an acceptance criterion
    n, T = 40_000, 4.0
    pmf = exact_state_distribution(P111, T, 64, 60)
    for simulate, seed in ((simulate_subordinated, 31), (simulate_decomposed, 37)):
        terminal = np.zeros(n, dtype=np.int64)
        for i in range(n):
            path = simulate(P111, SimSpec(T, seed, i))
            terminal[i] = path.post_states[-1] if path.n_events else 0
        emp = np.bincount(terminal, minlength=65) / n
        assert total_variation(emp, pmf.masses) < 0.02


def test_scale_path_empty():
    scaled = scale_path(_empty_path(), 5.0, 4)
    assert np.all(scaled.values == 0.0)
    assert scaled.grid[0] == 0.0 and scaled.grid[-1] == 1.0
    with pytest.raises(ValueError):
        scale_path(_empty_path(), 5.0, 0)


def test_scale_path_single_birth_right_continuous():
    # one birth exactly at T/2 counts at the t=0.5 grid point
    path = PathSample(
        np.array([5.0]), np.array([EventKind.BIRTH], dtype=np.uint8),
        np.array([1], dtype=np.int64),
    )
    scaled = scale_path(path, 10.0, 2)
    assert np.allclose(scaled.grid, [0.0, 0.5, 1.0])
    assert np.allclose(scaled.values, [0.0, 0.1, 0.1])


def test_scale_path_terminal_consistency():
    for i in range(50):
        path = simulate_decomposed(P111, SimSpec(4.0, 41, i))
        scaled = scale_path(path, 4.0, 13)
        assert scaled.values[-1] == terminal_value(path, 4.0)
        assert scaled.values[0] == 0.0


def test_terminal_and_sup_values():
    assert terminal_value(_empty_path(), 3.0) == 0.0
    assert sup_value(_empty_path(), 3.0) == 0.0
    path = PathSample(
        np.array([0.5, 1.0, 2.0]),
        np.array([0, 0, 1], dtype=np.uint8),
        np.array([1, 2, 1], dtype=np.int64),
    )
    T = 4.0
    assert terminal_value(path, T) == 1 / T
    assert sup_value(path, T) == 2 / T


def test_sup_dominates_terminal():
    for i in range(300):
        path = simulate_subordinated(P111, SimSpec(6.0, 43, i))
        assert sup_value(path, 6.0) >= terminal_value(path, 6.0)


def test_optimal_path_branches():
    # boundary: both branches coincide at x = alpha
    params = ModelParams(1.0, 1.0, 1.0)
    at_alpha = optimal_path(1.0, params)
    assert at_alpha.breakpoint == 0.0 and at_alpha.slope == 1.0

    below = optimal_path(1.0, ModelParams(1.0, 1.0, 2.0))
    assert below.breakpoint == 0.5 and below.slope == 2.0

    above = optimal_path(2.5, params)
    assert above.breakpoint == 0.0 and above.slope == 2.5

    with pytest.raises(ValueError):
        optimal_path(0.0, params)
    with pytest.raises(ValueError):
        optimal_path(-1.0, params)


@given(x=st.floats(min_value=0.01, max_value=8.0),
       alpha=st.floats(min_value=0.1, max_value=4.0))
@settings(max_examples=50, deadline=None)
def test_optimal_path_terminal_value(x, alpha):
    params = ModelParams(1.0, 1.0, alpha)
    trajectory = optimal_path(x, params)
    value_at_one = trajectory.values(np.array([1.0]))[0]
    assert math.isclose(value_at_one, x, rel_tol=1e-12)
    assert trajectory.values(np.array([0.0]))[0] == 0.0


def test_optimal_path_zero_before_breakpoint():
    trajectory = OptimalPath(breakpoint=0.4, slope=2.0, terminal=1.2)
    grid = np.linspace(0.0, 1.0, 11)
    values = trajectory.values(grid)
    assert np.all(values[grid <= 0.4] == 0.0)
    assert np.all(np.diff(values[grid >= 0.4]) > 0)
