import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from drso.applications.uq import Disc, HalfSpace, uq_solve
from drso.measures import DiscreteDistribution, GroundMetric, SchemaError

EUCLID = GroundMetric("euclidean", 1.0)


def _lp_min_mass(nominal, region, theta, metric):
    """min mu(C) by HiGHS over couplings onto the atoms and their exit points."""
    X = nominal.points
    exits = region.exit_point(X[region.contains(X)], metric)
    Y = np.vstack([X, exits])
    inside = np.concatenate([region.contains(X), np.zeros(len(exits), dtype=bool)])
    n, m = X.shape[0], Y.shape[0]
    C = metric.cost(X, Y)
    A_eq = np.zeros((n, n * m))
    for i in range(n):
        A_eq[i, i * m:(i + 1) * m] = 1
    res = linprog(np.tile(inside.astype(float), n), A_ub=C.ravel()[None, :],
                  b_ub=[theta ** metric.p], A_eq=A_eq, b_eq=nominal.weights,
                  bounds=(0, None), method="highs")
    return res.fun


def _random_case(rng):
    n = int(rng.integers(1, 7))
    X = rng.uniform(-1, 1, (n, 2)).round(3)
    X = np.unique(X, axis=0)
    nominal = DiscreteDistribution.from_points(X, rng.dirichlet(np.ones(X.shape[0])))
    if rng.random() < 0.5:
        region = Disc(rng.uniform(-0.3, 0.3, 2), rng.uniform(0.3, 1.2))
        metric = EUCLID
    else:
        region = HalfSpace(rng.normal(size=2), rng.uniform(-0.5, 0.5))
        metric = GroundMetric(str(rng.choice(["euclidean", "l1", "linf"])), float(rng.choice([1, 2])))
    return nominal, region, metric, float(rng.uniform(0, 1))


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_greedy_matches_lp(seed):
    rng = np.random.default_rng(seed)
    nominal, region, metric, theta = _random_case(rng)
    res = uq_solve(nominal, region, theta, metric)
    assert res.value == pytest.approx(_lp_min_mass(nominal, region, theta, metric), abs=1e-8)
    assert res.cost <= theta ** metric.p + 1e-12
    assert res.distribution.weights.sum() == pytest.approx(1.0)


def test_zero_radius_returns_nominal_mass():
    X = np.array([[0.0, 0.0], [0.5, 0.0], [2.0, 2.0]])
    nominal = DiscreteDistribution.from_points(X, [0.2, 0.3, 0.5])
    res = uq_solve(nominal, Disc([0, 0], 1.0), 0.0, EUCLID)
    assert res.value == 0.5 and res.nominal_mass == 0.5


def test_large_radius_empties_open_region():
    X = np.array([[0.0, 0.0], [0.5, 0.0]])
    nominal = DiscreteDistribution.from_points(X, [0.5, 0.5])
    # exit distances 1 and 0.5, so the budget (0.5 + 0.25) suffices
    assert uq_solve(nominal, Disc([0, 0], 1.0), 0.75, EUCLID).value == pytest.approx(0.0, abs=1e-15)
    res = uq_solve(nominal, Disc([0, 0], 1.0), 0.5, EUCLID)
    assert res.value == pytest.approx(0.25)
    assert res.split_index == 0


def test_closed_region_approaches_open_one():
    X = np.array([[0.0, 0.0], [0.5, 0.0], [0.0, -0.8]])
    nominal = DiscreteDistribution.from_points(X, [0.3, 0.3, 0.4])
    open_val = uq_solve(nominal, Disc([0, 0], 1.0), 0.3, EUCLID).value
    diffs = [abs(uq_solve(nominal, Disc([0, 0], 1.0, closed=True, offset=e), 0.3, EUCLID).value
                 - open_val) for e in (1e-1, 1e-2, 1e-3, 1e-4)]
    assert np.all(np.diff(diffs) < 0) and diffs[-1] < 1e-3


def test_region_validation():
    with pytest.raises(SchemaError):
        Disc([0, 0], 0.0)
    with pytest.raises(SchemaError):
        Disc([0, 0], 1.0, closed=True)
    with pytest.raises(SchemaError):
        HalfSpace([0, 0], 1.0)
    with pytest.raises(SchemaError):
        Disc([0, 0], 1.0).exit_distance([[0.0, 0.0]], GroundMetric("l1", 1.0))
    with pytest.raises(SchemaError):
        uq_solve(DiscreteDistribution.from_points([[0.0, 0.0]]), Disc([0, 0], 1.0), -1, EUCLID)
