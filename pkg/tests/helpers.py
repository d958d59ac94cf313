"""Random instance generators shared by the test modules."""
import numpy as np

from drso.dual import WassersteinBall
from drso.measures import DiscreteDistribution, GroundMetric, PointSpace
from drso.objectives import Objective, table_objective

METRICS = ("euclidean", "l1", "linf", "discrete", "explicit-matrix")


def random_metric_matrix(rng, m):
    """Shortest-path closure of random positive weights: a valid metric."""
    W = rng.uniform(0.5, 3.0, (m, m))
    D = np.minimum(W, W.T)
    np.fill_diagonal(D, 0.0)
    for k in range(m):
        D = np.minimum(D, D[:, [k]] + D[[k], :])
    return D


def random_instance(rng, max_atoms=5, max_cands=20, kinds=METRICS, p=None):
    """(ball, objective, candidates) with N <= max_atoms and |Xi| <= max_cands."""
    m = int(rng.integers(2, max_cands + 1))
    kind = kinds[int(rng.integers(len(kinds)))]
    p = float(rng.integers(1, 3)) if p is None else float(p)
    if kind == "explicit-matrix":
        metric = GroundMetric(kind, p, random_metric_matrix(rng, m))
        pts = np.arange(m, dtype=float)[:, None]
    else:
        metric = GroundMetric(kind, p)
        dim = int(rng.integers(1, 4))
        pts = np.unique(rng.uniform(-3, 3, (m, dim)).round(3), axis=0)
        m = pts.shape[0]
    cands = PointSpace(pts)
    n = int(rng.integers(1, min(max_atoms, m) + 1))
    idx = rng.choice(m, size=n, replace=False)
    nominal = DiscreteDistribution(cands, idx, rng.dirichlet(np.ones(n)))
    scale = float(metric.pairwise(pts, pts).max())
    theta = float(rng.uniform(0.0, 1.2)) * max(scale, 1e-3)
    obj = table_objective(pts, rng.normal(size=m))
    return WassersteinBall(nominal, metric, theta), obj, cands


def mcshane(anchors, values, metric, L=1.0):
    """x -> min_k (values_k + L d(x, anchor_k)); L-Lipschitz for any anchor values."""
    A = np.atleast_2d(np.asarray(anchors, dtype=float))
    v = np.asarray(values, dtype=float)
    return Objective(lambda X: np.min(v[None, :] + L * metric.pairwise(X, A), axis=1),
                     lipschitz=(L, 0.0), name="mcshane")

