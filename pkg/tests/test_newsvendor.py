import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from drso.applications.newsvendor import (NewsvendorInstance, bin_demand, newsvendor_loss,
                                          newsvendor_solve)
from drso.measures import SchemaError


def _bin_lp(q, h, b, theta, p, x):
    """Worst-case expected cost of order x from the coupling LP over bins."""
    B = q.size
    j = np.arange(B, dtype=float)
    loss = np.maximum(h * (x - j), b * (j - x))
    C = np.abs(j[:, None] - j[None, :]) ** p
    A_eq = np.zeros((B, B * B))
    for i in range(B):
        A_eq[i, i * B:(i + 1) * B] = 1
    res = linprog(-np.tile(loss, B), A_ub=C.ravel()[None, :], b_ub=[theta ** p], A_eq=A_eq,
                  b_eq=q, bounds=(0, None), method="highs")
    return -res.fun


def test_zero_radius_orders_a_median():
    q = np.array([0.1, 0.3, 0.0, 0.35, 0.25])
    res = newsvendor_solve(NewsvendorInstance(q, 1.0, 1.0, 0.0))
    cdf = np.cumsum(q)
    x = res.x_star
    assert cdf[x] >= 0.5 and (x == 0 or cdf[x - 1] <= 0.5)
    assert res.value == pytest.approx(np.sum(q * np.abs(x - np.arange(5))), abs=1e-12)


def test_uniform_five_bins_matches_lp():
    q = np.full(5, 0.2)
    res = newsvendor_solve(NewsvendorInstance(q, 1.0, 1.0, 0.5))
    assert res.value == pytest.approx(_bin_lp(q, 1, 1, 0.5, 1, res.x_star), abs=1e-8)
    for x in range(5):
        assert res.values[x] == pytest.approx(_bin_lp(q, 1, 1, 0.5, 1, x), abs=1e-8)


def test_worst_case_can_use_empty_interior_bins():
    q = np.array([0.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.5])
    res = newsvendor_solve(NewsvendorInstance(q, 1.0, 1.0, 0.5), orders=[3])
    used = set(res.worst_case.distribution.points[:, 0].astype(int).tolist())
    assert used - {1, 6}
    assert any(q[j] == 0 for j in used)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_random_small_instances_match_lp(seed):
    rng = np.random.default_rng(seed)
    B = int(rng.integers(2, 9))
    q = rng.dirichlet(np.ones(B + 1)) * (rng.random(B + 1) < 0.7)
    if q.sum() == 0:
        q[0] = 1.0
    q /= q.sum()
    h, b = rng.uniform(0.2, 2, 2)
    p = float(rng.choice([1.0, 2.0]))
    theta = float(rng.uniform(0, 2))
    res = newsvendor_solve(NewsvendorInstance(q, h, b, theta, p))
    lp = [_bin_lp(q, h, b, theta, p, x) for x in range(B + 1)]
    assert res.value == pytest.approx(min(lp), abs=1e-8)
    assert res.values == pytest.approx(lp, abs=1e-8)


def test_value_is_monotone_in_radius():
    q = bin_demand(np.random.default_rng(0).binomial(20, 0.5, 80), 20)
    vals = [newsvendor_solve(NewsvendorInstance(q, 1.0, 3.0, t)).value
            for t in (0.0, 0.1, 0.5, 1.0, 3.0)]
    assert np.all(np.diff(vals) >= -1e-12)


def test_binning_and_validation():
    assert bin_demand([0.4, 1.6, 7, -2], 3).tolist() == [0.5, 0.0, 0.25, 0.25]
    with pytest.raises(SchemaError):
        NewsvendorInstance(np.ones(3) / 3, -1, 1, 0.1)
    with pytest.raises(SchemaError):
        NewsvendorInstance(np.ones(3) / 3, 1, 1, -0.1)
    with pytest.raises(SchemaError):
        bin_demand([], 3)
    loss = newsvendor_loss(2.0, 1.0, 3.0)
    assert loss.values([[0.0], [2.0], [5.0]]).tolist() == [2.0, 0.0, 9.0]
