import numpy as np
import pytest

from drso.applications.affine import affine_drso, affine_value
from drso.dual import WassersteinBall, solve_dual
from drso.measures import DiscreteDistribution, GroundMetric, PointSpace, SchemaError
from drso.objectives import Objective


def test_single_point_example():
    assert affine_value([1, 0], [[1, 0]], [0], 0.1, 2.0) == pytest.approx(1.1)


def test_zero_radius_is_sample_average():
    rng = np.random.default_rng(0)
    A, b = rng.normal(size=(5, 3)), rng.normal(size=5)
    x = rng.normal(size=3)
    assert affine_value(x, A, b, 0.0, 2.0) == pytest.approx(np.mean(A @ x + b))


def test_best_candidate_and_ties():
    A, b = [[1.0, -1.0], [0.0, 2.0]], [0.0, 1.0]
    cands = [[1.0, 1.0], [0.0, 0.0], [0.0, 0.0], [-1.0, 0.5]]
    x, v = affine_drso(A, b, 0.2, 1.0, cands)
    vals = [affine_value(c, A, b, 0.2, 1.0) for c in cands]
    assert v == min(vals) and x.tolist() == cands[int(np.argmin(vals))]


@pytest.mark.parametrize("x", [-1.5, -0.4, 0.7, 2.0])
def test_agrees_with_dual_on_a_grid(x):
    # scalar coefficient a, loss a x + b, absolute-value metric (dual norm is |x|)
    a_hat = np.array([0.25, -0.5, 1.0])
    b_hat = np.array([1.0, 0.0, -0.5])
    theta = 0.3
    exact = affine_value([x], a_hat[:, None], b_hat, theta, 1.0)
    cands = PointSpace.grid_1d(-10, 10, 1e-3)
    metric = GroundMetric("absolute-1d", 1.0)
    nominal = DiscreteDistribution.from_points(a_hat[:, None])
    obj = Objective(lambda pts: pts[:, 0] * x, kappa=abs(x))
    v = solve_dual(WassersteinBall(nominal, metric, theta), obj, cands).v_dual
    assert v + b_hat.mean() == pytest.approx(exact, abs=1e-9)


def test_validation():
    with pytest.raises(SchemaError):
        affine_value([1, 0], [[1, 0, 0]], [0], 0.1, 2.0)
    with pytest.raises(SchemaError):
        affine_value([1, 0], [[1, 0]], [0], -0.1, 2.0)
    with pytest.raises(SchemaError):
        affine_value([1, 0], [[1, 0]], [0], 0.1, 0.5)
