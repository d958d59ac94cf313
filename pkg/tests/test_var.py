import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog
from scipy.stats import norm

from drso.applications.var import VaRQuery, gaussian_condition, var_grid_scan, wc_var
from drso.measures import SchemaError


def _trapezoid_condition(q, var, m=0.0, s=1.0, n=20001):
    """Integral of (q - y) times the normal density over [VaR, q] by the trapezoid rule."""
    if q <= var:
        return 0.0
    y = np.linspace(var, q, n)
    f = (q - y) * norm.pdf(y, m, s)
    return float(np.sum(0.5 * (f[1:] + f[:-1]) * np.diff(y)))


def _trapezoid_crossing(theta, alpha, step=1e-5):
    var = norm.ppf(1 - alpha)
    lo, hi = var, var + 1.0
    while _trapezoid_condition(hi, var) < theta:
        hi += 1.0
    # scan the bracket at a coarse step, then refine the crossing cell
    for width in (1e-2, 1e-3, 1e-4, step):
        grid = np.arange(lo, hi + width, width)
        k = next(i for i, q in enumerate(grid) if _trapezoid_condition(q, var) >= theta)
        lo, hi = grid[max(k - 1, 0)], grid[k]
    return hi


def _gauss(theta, alpha=0.05, p=1.0):
    return VaRQuery(w=[1.0], alpha=alpha, theta=theta, p=p, mean=[0.0], cov=[[1.0]])


def test_gaussian_condition_is_met_with_equality():
    res = wc_var(_gauss(0.1))
    assert res.certificate == pytest.approx(0.1, abs=1e-6)
    assert res.var_nominal == pytest.approx(norm.ppf(0.95))
    assert res.var_wc > res.var_nominal


def test_gaussian_agrees_with_trapezoid_scan():
    res = wc_var(_gauss(0.1))
    assert res.var_wc == pytest.approx(_trapezoid_crossing(0.1, 0.05), abs=1e-5)
    assert var_grid_scan(_gauss(0.1), 1e-6) == pytest.approx(res.var_wc, abs=2e-6)


def test_condition_starts_at_zero_and_increases():
    var = norm.ppf(0.95)
    assert gaussian_condition(var, var, 0.0, 1.0) == 0.0
    vals = [gaussian_condition(var + d, var, 0.0, 1.0) for d in (0.01, 0.1, 0.5, 1.0)]
    assert np.all(np.diff(vals) > 0)
    for d in (0.01, 0.3, 1.0):
        assert gaussian_condition(var + d, var, 0.0, 1.0) == pytest.approx(
            _trapezoid_condition(var + d, var), abs=1e-9)


def test_small_radius_recovers_nominal_var():
    res = wc_var(_gauss(1e-14))
    assert res.var_wc == pytest.approx(norm.ppf(0.95), abs=1e-6)


def test_higher_order_matches_closed_form_at_one():
    a = wc_var(_gauss(0.1, p=1.0))
    b = wc_var(_gauss(0.1 ** 1.0, p=1.0 + 1e-12))
    assert b.var_wc == pytest.approx(a.var_wc, abs=1e-6)
    c = wc_var(_gauss(0.1, p=2.0))
    assert c.certificate == pytest.approx(0.01, rel=1e-6)


def test_monotone_in_radius_and_level():
    qs = [wc_var(_gauss(t)).var_wc for t in (0.01, 0.05, 0.1, 0.3)]
    assert np.all(np.diff(qs) > 0)
    qa = [wc_var(_gauss(0.1, alpha=a)).var_wc for a in (0.2, 0.1, 0.05, 0.01)]
    assert np.all(np.diff(qa) > 0)


def _knapsack_cost(q, z, pi, alpha, p):
    """Cheapest way to put mass alpha at or above q: a fractional knapsack LP."""
    cost = np.maximum(q - z, 0.0) ** p
    res = linprog(cost, A_eq=np.ones((1, z.size)), b_eq=[alpha], bounds=list(zip(0 * pi, pi)),
                  method="highs")
    return res.fun


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_empirical_nominal_matches_knapsack_lp(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 12))
    z = rng.normal(size=n).round(2)
    pi = rng.dirichlet(np.ones(n))
    alpha = float(rng.uniform(0.02, 0.5))
    theta = float(rng.uniform(0.01, 0.5))
    p = float(rng.choice([1.0, 2.0]))
    res = wc_var(VaRQuery(w=[-1.0], alpha=alpha, theta=theta, p=p, samples=z[:, None], weights=pi))
    budget = theta ** p
    lo, hi = res.var_nominal, res.var_nominal + 100.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        lo, hi = (lo, mid) if _knapsack_cost(mid, z, pi, alpha, p) >= budget else (mid, hi)
    assert res.var_wc == pytest.approx(hi, abs=1e-7)


def test_tie_rules_on_a_point_mass():
    theta, alpha = 0.1, 0.05
    exact = wc_var(VaRQuery(w=[1.0], alpha=alpha, theta=theta, samples=[[0.0]]))
    assert exact.var_wc == pytest.approx(theta / alpha, rel=1e-9)
    literal = wc_var(VaRQuery(w=[1.0], alpha=alpha, theta=theta, samples=[[0.0]],
                              tie_rule="literal"))
    assert literal.var_wc == pytest.approx(theta / math.sqrt(alpha), rel=1e-9)


def test_query_validation():
    with pytest.raises(SchemaError):
        VaRQuery(w=[0.5], alpha=0.05, theta=0.1, mean=[0.0], cov=[[1.0]])
    with pytest.raises(SchemaError):
        VaRQuery(w=[1.0], alpha=1.5, theta=0.1, mean=[0.0], cov=[[1.0]])
    with pytest.raises(SchemaError):
        VaRQuery(w=[1.0], alpha=0.05, theta=0.0, mean=[0.0], cov=[[1.0]])
    with pytest.raises(SchemaError):
        VaRQuery(w=[1.0], alpha=0.05, theta=0.1)
    with pytest.raises(SchemaError):
        VaRQuery(w=[1.0], alpha=0.05, theta=0.1, mean=[0.0], cov=[[1.0]], metric="l2")
