import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize_scalar

from drso.measures import DIVERGENCE_KINDS, SchemaError, phi_divergence, phi_function
from drso.phi import (best_delta, calibrate_radius, conjugate, conjugate_derivative,
                      log_concentration_bound, newsvendor_comparison, phi_worst_case,
                      sample_demand, talagrand_constant)

from phi_oracle import brute_force

SLOPES = {
    "kl": [-3.0, -0.5, 0.0, 0.7, 2.0],
    "burg": [-5.0, -1.0, -0.3, -0.05],
    "chi2": [-4.0, -1.0, 0.0, 0.5, 0.9],
    "modified-chi2": [-3.0, -2.0, -1.0, 0.0, 1.5],
    "hellinger": [-4.0, -1.0, 0.0, 0.5, 0.8],
    "tv": [-2.0, -1.0, -0.3, 0.0, 0.6, 1.0],
}


def _numeric_conjugate(kind, s):
    """sup_{t >= 0} s t - phi(t) by bounded scalar search."""
    f = lambda t: -(s * t - float(phi_function(kind, t)))
    best = -f(0.0) if np.isfinite(phi_function(kind, 0.0)) else -math.inf
    for hi in (1e-3, 1.0, 10.0, 1e3):
        res = minimize_scalar(f, bounds=(0.0, hi), method="bounded",
                              options={"xatol": 1e-12, "maxiter": 2000})
        best = max(best, -res.fun)
    return best


@pytest.mark.parametrize("kind", DIVERGENCE_KINDS)
def test_conjugates_match_numeric_supremum(kind):
    for s in SLOPES[kind]:
        assert float(conjugate(kind, s)) == pytest.approx(_numeric_conjugate(kind, s), abs=1e-8)


@pytest.mark.parametrize("kind", [k for k in DIVERGENCE_KINDS if k != "tv"])
def test_conjugate_derivative_is_the_slope(kind):
    h = 1e-6
    for s in SLOPES[kind]:
        if kind == "modified-chi2" and s == -2.0:
            continue  # kink where the maximizer reaches zero
        fd = (float(conjugate(kind, s + h)) - float(conjugate(kind, s - h))) / (2 * h)
        assert float(conjugate_derivative(kind, s)) == pytest.approx(fd, rel=1e-6, abs=1e-7)


def test_conjugate_domains():
    assert conjugate("burg", 0.0) == np.inf
    assert conjugate("chi2", 1.0) == np.inf
    assert conjugate("tv", 1.5) == np.inf
    assert conjugate("modified-chi2", -10.0) == -1.0
    with pytest.raises(SchemaError):
        conjugate("renyi", 0.0)


@pytest.mark.parametrize("kind", DIVERGENCE_KINDS)
def test_zero_radius_returns_nominal(kind):
    q = np.array([0.2, 0.5, 0.3])
    wc = phi_worst_case(q, [1.0, -1.0, 3.0], 0.0, kind)
    assert wc.p_star == pytest.approx(q, abs=1e-9)
    assert wc.value == pytest.approx(q @ [1.0, -1.0, 3.0], abs=1e-9)


def test_kl_two_point_tilt():
    q = np.array([0.5, 0.5])
    wc = phi_worst_case(q, [0.0, 1.0], 0.1, "kl")
    # exponential tilt p = (1, e^t) / (1 + e^t) with t fixed by the divergence
    g = lambda t: math.log(2) + t * math.exp(t) / (1 + math.exp(t)) - math.log(1 + math.exp(t)) - 0.1
    lo, hi = 0.0, 10.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if g(mid) < 0 else (lo, mid)
    p2 = math.exp(lo) / (1 + math.exp(lo))
    assert wc.p_star[1] == pytest.approx(p2, abs=1e-9)
    assert wc.divergence == pytest.approx(0.1, abs=1e-10)
    assert wc.lambda_star == pytest.approx(1 / lo, rel=1e-6)


def test_burg_pops_mass_onto_the_best_empty_index():
    q = np.array([0.5, 0.5, 0.0])
    psi = np.array([0.0, 1.0, 2.0])
    wc = phi_worst_case(q, psi, 0.5, "burg")
    assert wc.j_M == 2 and wc.popped > 0
    assert wc.value == pytest.approx(brute_force(q, psi, 0.5, "burg"), abs=1e-6)
    # tilting inside the support is cheaper to second order, so tiny radii do not pop
    small = phi_worst_case(q, psi, 1e-4, "burg")
    assert small.popped == 0.0
    assert small.value == pytest.approx(brute_force(q, psi, 1e-4, "burg"), abs=1e-6)


def test_chi2_pops_only_past_a_threshold():
    q = np.array([0.5, 0.5, 0.0])
    psi = np.array([0.0, 1.0, 1.2])
    assert phi_worst_case(q, psi, 0.01, "chi2").popped == 0.0
    wc = phi_worst_case(q, psi, 1.0, "chi2")
    assert wc.popped > 0
    assert wc.value == pytest.approx(brute_force(q, psi, 1.0, "chi2"), abs=1e-6)


def test_ties_are_separated_and_reported():
    wc = phi_worst_case([0.3, 0.3, 0.4], [1.0, 1.0, 0.0], 0.2, "kl")
    assert wc.perturbed
    assert not phi_worst_case([0.3, 0.3, 0.4], [1.0, 0.5, 0.0], 0.2, "kl").perturbed
    const = phi_worst_case([0.3, 0.3, 0.4], [2.0, 2.0, 2.0], 0.2, "kl")
    assert const.value == pytest.approx(2.0) and const.lambda_star == 0.0


def _random_three_point(rng, kind):
    q = rng.dirichlet(np.ones(3))
    if rng.random() < 0.3:
        q[int(rng.integers(3))] = 0.0
        q /= q.sum()
    psi = rng.normal(size=3).round(3)
    return q, psi, float(rng.uniform(0.01, 1.0))


@pytest.mark.parametrize("kind", DIVERGENCE_KINDS)
def test_matches_brute_force(kind):
    rng = np.random.default_rng(sorted(DIVERGENCE_KINDS).index(kind))
    for _ in range(3):
        q, psi, theta = _random_three_point(rng, kind)
        wc = phi_worst_case(q, psi, theta, kind)
        assert wc.value == pytest.approx(brute_force(q, psi, theta, kind), abs=1e-6)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from(DIVERGENCE_KINDS))
def test_support_and_tightness(seed, kind):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 9))
    q = rng.dirichlet(np.ones(n)) * (rng.random(n) < 0.7)
    if q.sum() == 0:
        q[0] = 1.0
    q /= q.sum()
    psi = rng.normal(size=n)
    theta = float(rng.uniform(0.001, 1.5))
    wc = phi_worst_case(q, psi, theta, kind)
    p = wc.p_star
    assert p.min() >= 0 and p.sum() == pytest.approx(1.0, abs=1e-12)
    assert phi_divergence(p, q, kind) <= theta + 1e-8
    off = np.nonzero((q == 0) & (p > 0))[0].tolist()
    if kind in ("kl", "modified-chi2"):
        assert off == []
    else:
        assert off in ([], [wc.j_M])
    if wc.lambda_star > 0 and kind != "tv":
        assert wc.divergence == pytest.approx(theta, abs=1e-8)
    assert wc.value >= q @ psi - 1e-12


# ---------------------------------------------------------------------------
# radius calibration
# ---------------------------------------------------------------------------

def test_talagrand_constant_is_positive_and_scale_aware():
    x = sample_demand("binomial", 200, seed=1)
    lam = talagrand_constant(x)
    assert lam > 0
    assert talagrand_constant(2 * x) == pytest.approx(lam / 4, rel=1e-2)


def test_calibrated_radius_hits_the_target():
    x = sample_demand("binomial", 500, seed=2)
    cal = calibrate_radius(x, 100)
    assert cal.bound == pytest.approx(0.05, abs=1e-6)
    assert 0 < cal.delta < cal.theta
    assert math.isfinite(cal.theta) and cal.theta > 0


def test_bound_is_monotone_in_radius_and_samples():
    lam = 0.05
    vals = [best_delta(t, 100, lam, 500)[0] for t in np.linspace(5, 60, 12)]
    assert np.all(np.diff(vals) <= 1e-12)
    x = sample_demand("geometric", 500, seed=3)
    assert calibrate_radius(x, 100).theta < calibrate_radius(x[:50], 100).theta


def test_best_delta_beats_the_grid():
    lam, theta = 0.05, 30.0
    val, delta = best_delta(theta, 100, lam, 500)
    grid = [log_concentration_bound(theta, d, 100, lam, 500) for d in np.linspace(0.01, 29.99, 3000)]
    assert val <= min(grid) + 1e-12 and 0 < delta < theta


def test_calibration_errors():
    with pytest.raises(SchemaError):
        calibrate_radius([1.0, 2.0], 100, target=1.5)
    with pytest.raises(SchemaError):
        calibrate_radius([0.0, 100.0], 100)  # two spread-out samples never concentrate enough
    with pytest.raises(SchemaError):
        sample_demand("poisson", 10)


def test_sampled_demand_stays_in_range():
    g = sample_demand("geometric", 300, support_max=20, seed=4)
    assert g.min() >= 0 and g.max() <= 20 and g.size == 300


def test_comparison_harness_structure():
    x = sample_demand("binomial", 50, support_max=20, seed=5)
    cmp = newsvendor_comparison(x, support_max=20, theta_w=1.0, theta_phi=0.1)
    q = cmp.q
    assert set(cmp.orders) == {"wasserstein", "burg", "kl"}
    assert np.all(cmp.worst["kl"][q == 0] == 0)
    assert np.count_nonzero(cmp.worst["burg"][q == 0]) <= 1
    for v in cmp.worst.values():
        assert v.sum() == pytest.approx(1.0)
