import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from drso.lp import LPBudgetExceeded
from drso.measures import SchemaError
from drso.process import (ControlPolicy, SamplePath, evaluate_control, generate_paths,
                          inner_lp_oracle, jaccard, optimize_control, true_on_region)


def test_single_arrival_example():
    v, tr = evaluate_control(ControlPolicy([(0.4, 0.6)]), [SamplePath([0.5])], 0.05, 1.0)
    assert v == pytest.approx(0.3, abs=1e-15)
    assert tr.removals == [(0, 0, pytest.approx(0.5), pytest.approx(0.1))]


def test_zero_radius_counts_covered_arrivals():
    paths = [SamplePath([0.1, 0.5, 0.55]), SamplePath([0.52, 0.9])]
    v, _ = evaluate_control(ControlPolicy([(0.4, 0.6)]), paths, 0.0, 2.0)
    assert v == pytest.approx(-0.4 + 3 / 2)


def test_saturated_budget_removes_everything():
    paths = [SamplePath([0.1, 0.5, 0.55]), SamplePath([0.52, 0.9])]
    ctrl = ControlPolicy([(0.4, 0.6)])
    v, tr = evaluate_control(ctrl, paths, 10.0, 2.0)
    assert v == pytest.approx(-2.0 * 0.2)
    assert tr.removal_value == pytest.approx(1.5)


def test_endpoints_at_the_boundary_cannot_be_crossed():
    paths = [SamplePath([0.2, 0.6]), SamplePath([0.5])]
    v, tr = evaluate_control(ControlPolicy([(0.0, 1.0)]), paths, 5.0, 0.0)
    assert v == pytest.approx(1.5) and tr.removals == []
    assert inner_lp_oracle(ControlPolicy([(0.0, 1.0)]), paths, 5.0) == 0.0


def _random_case(rng):
    n = int(rng.integers(1, 5))
    paths = [SamplePath(rng.random(int(rng.integers(0, 6))).round(3)) for _ in range(n)]
    cuts = np.sort(rng.choice(np.linspace(0, 1, 41), 2 * int(rng.integers(1, 4)), replace=False))
    ctrl = ControlPolicy([(cuts[2 * k], cuts[2 * k + 1]) for k in range(cuts.size // 2)])
    return paths, ctrl, float(rng.uniform(0, 0.3))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_greedy_matches_lp(seed):
    rng = np.random.default_rng(seed)
    paths, ctrl, theta = _random_case(rng)
    _, tr = evaluate_control(ctrl, paths, theta, 1.0)
    assert tr.removal_value == pytest.approx(inner_lp_oracle(ctrl, paths, theta), abs=1e-9)
    assert tr.spent <= tr.budget + 1e-12


def test_oracle_budget():
    paths = [SamplePath(np.linspace(0.1, 0.9, 50)) for _ in range(4)]
    with pytest.raises(LPBudgetExceeded):
        inner_lp_oracle(ControlPolicy([(0.05, 0.95)]), paths, 0.1, max_decisions=100)


def test_expensive_running_cost_switches_off():
    paths = generate_paths(5, 10, seed=1)
    ctrl, v = optimize_control(paths, 0.02, 1e3)
    assert ctrl.intervals == [] and v == 0.0


def test_free_running_cost_covers_everything():
    paths = generate_paths(3, 10, seed=2)
    ctrl, v = optimize_control(paths, 0.0, 0.0)
    total = sum(p.arrivals.size for p in paths) / 3
    assert v == pytest.approx(total)


def test_optimized_intervals_contain_data():
    paths = generate_paths(10, 10, seed=3)
    ctrl, v = optimize_control(paths, 0.02, 10.0)
    flat = np.concatenate([p.arrivals for p in paths])
    for lo, hi in ctrl.intervals:
        assert np.any((flat >= lo) & (flat <= hi))
    assert v == pytest.approx(evaluate_control(ctrl, paths, 0.02, 10.0)[0])


def test_synthetic_experiment_recovers_the_on_region():
    truth = true_on_region(10, 10)
    assert [(round(lo, 3), round(hi, 3)) for lo, hi in truth.intervals] == [
        (0.0, 0.1), (0.3, 0.5), (0.7, 0.9)]
    ctrl, _ = optimize_control(generate_paths(10, 10, seed=0), 0.02, 10.0)
    assert jaccard(ctrl, truth) >= 0.5


def test_generated_paths_are_reproducible():
    a = generate_paths(4, 10, seed=7)
    b = generate_paths(4, 10, seed=7)
    assert all(np.array_equal(x.arrivals, y.arrivals) for x, y in zip(a, b))


def test_jaccard_and_validation():
    a = ControlPolicy([(0.0, 0.5)])
    b = ControlPolicy([(0.25, 0.75)])
    assert jaccard(a, b) == pytest.approx(1 / 3)
    assert jaccard(ControlPolicy([]), ControlPolicy([])) == 1.0
    with pytest.raises(SchemaError):
        ControlPolicy([(0.5, 0.6), (0.55, 0.7)])
    with pytest.raises(SchemaError):
        ControlPolicy([(0.5, 1.2)])
    with pytest.raises(SchemaError):
        SamplePath([-0.1])
    with pytest.raises(SchemaError):
        evaluate_control(a, [SamplePath([0.1])], -1.0, 1.0)
