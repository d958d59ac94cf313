"""Worst-case probability of a region: inf mu(C) over a Wasserstein ball.

Only atoms inside C matter; moving atom i out of C costs its exit distance
d_i = d(z_i, complement of C). The adversary removes atoms in order of
increasing exit distance until the budget theta^p is spent, splitting the last.
"""
from dataclasses import dataclass
from typing import List

import numpy as np

from ..dual import WassersteinBall, primal_oracle
from ..measures import DiscreteDistribution, GroundMetric, PointSpace, SchemaError
from ..objectives import table_objective


def _dual_norm(a, metric: GroundMetric):
    q = metric.dual_norm_order()
    return float(np.linalg.norm(a, ord=q))


class Disc:
    """Euclidean disc {x : |x - center| < radius} (closed=True includes the boundary).

    For a closed disc an atom must be pushed offset beyond the boundary to leave.
    """

    def __init__(self, center, radius, closed=False, offset=0.0):
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        self.closed = closed
        self.offset = float(offset)
        if self.radius <= 0:
            raise SchemaError("disc radius must be positive")
        if closed and self.offset <= 0:
            raise SchemaError("a closed disc needs a positive exit offset")

    def _check(self, metric):
        if metric.kind != "euclidean":
            raise SchemaError("disc regions need the euclidean metric")

    def contains(self, X):
        r = np.linalg.norm(np.atleast_2d(X) - self.center, axis=1)
        return r <= self.radius if self.closed else r < self.radius

    def exit_distance(self, X, metric):
        self._check(metric)
        r = np.linalg.norm(np.atleast_2d(X) - self.center, axis=1)
        return np.where(self.contains(X), self.radius - r + self.offset, 0.0)

    def exit_point(self, X, metric):
        self._check(metric)
        X = np.atleast_2d(np.asarray(X, dtype=float))
        v = X - self.center
        r = np.linalg.norm(v, axis=1)
        u = np.where(r[:, None] > 0, v / np.where(r > 0, r, 1.0)[:, None], 0.0)
        u[r == 0, 0] = 1.0
        return self.center + (self.radius + self.offset) * u


class HalfSpace:
    """{x : a.x < b} (closed=True: a.x <= b). Exit distance uses the dual norm of a."""

    def __init__(self, a, b, closed=False, offset=0.0):
        self.a = np.asarray(a, dtype=float).ravel()
        self.b = float(b)
        self.closed = closed
        self.offset = float(offset)
        if not np.any(self.a):
            raise SchemaError("half-space normal must be nonzero")
        if closed and self.offset <= 0:
            raise SchemaError("a closed half-space needs a positive exit offset")

    def contains(self, X):
        s = np.atleast_2d(X) @ self.a
        return s <= self.b if self.closed else s < self.b

    def exit_distance(self, X, metric):
        s = np.atleast_2d(X) @ self.a
        return np.where(self.contains(X), (self.b - s) / _dual_norm(self.a, metric) + self.offset, 0.0)

    def _direction(self, metric):
        a = self.a
        if metric.kind in ("euclidean",):
            return a / np.linalg.norm(a)
        if metric.kind in ("l1", "absolute-1d"):
            k = int(np.argmax(np.abs(a)))
            u = np.zeros_like(a)
            u[k] = np.sign(a[k])
            return u
        if metric.kind == "linf":
            return np.sign(a)
        raise SchemaError(f"half-space exits need a norm metric, not {metric.kind!r}")

    def exit_point(self, X, metric):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        d = self.exit_distance(X, metric)
        return X + d[:, None] * self._direction(metric)[None, :]


@dataclass
class UQResult:
    value: float  # worst-case probability inf mu(C)
    nominal_mass: float  # nu(C)
    moves: List[tuple]  # (atom, fraction moved, exit point)
    distribution: DiscreteDistribution
    cost: float
    split_index: object


def uq_solve(nominal: DiscreteDistribution, region, theta: float, metric: GroundMetric) -> UQResult:
    """Greedy exit-distance transport; returns the worst-case probability of the region."""
    if theta < 0:
        raise SchemaError("theta must be nonnegative")
    X = nominal.points
    w = nominal.weights
    p = metric.p
    inside = region.contains(X)
    d = region.exit_distance(X, metric)
    budget = theta ** p
    order = sorted(np.nonzero(inside & (w > 0))[0].tolist(), key=lambda i: (d[i], i))
    spent = 0.0
    removed = 0.0
    moves = []
    split = None
    snap = 1e-12 * max(1.0, budget)
    for i in order:
        full = w[i] * d[i] ** p
        if spent + full <= budget + snap:
            frac = 1.0
        else:
            frac = (budget - spent) / full
            if frac <= 0:
                break
            split = i
        spent += frac * full
        removed += frac * w[i]
        moves.append((i, frac, region.exit_point(X[i], metric)[0]))
        if split is not None:
            break
    pts = [X]
    wts = w.copy()
    for i, frac, e in moves:
        wts[i] -= frac * w[i]
        pts.append(e[None, :])
        wts = np.append(wts, frac * w[i])
    P = np.vstack(pts)
    keep = wts > 0
    dist = DiscreteDistribution.from_points(P[keep], wts[keep] / wts[keep].sum(), renormalize_tol=1e-9)
    nominal_mass = float(w[inside].sum())
    return UQResult(nominal_mass - removed, nominal_mass, moves, dist, min(spent, budget), split)


def uq_oracle(nominal: DiscreteDistribution, region, theta: float, metric: GroundMetric,
              extra_points=None, max_vars: int = 40000) -> float:
    """inf mu(C) from the primal transport LP on the nominal points, their exit
    points and any extra candidate points."""
    X = nominal.points
    exits = region.exit_point(X[region.contains(X)], metric)
    parts = [X, exits]
    if extra_points is not None:
        parts.append(np.atleast_2d(extra_points))
    P = np.unique(np.vstack(parts), axis=0)
    # exit points sit on (or beyond) the boundary and are outside C by construction
    on_exit = np.zeros(P.shape[0], dtype=bool)
    for e in exits:
        on_exit |= np.all(P == e, axis=1)
    vals = np.where(region.contains(P) & ~on_exit, -1.0, 0.0)
    cands = PointSpace(P, check_distinct=False)
    ball = WassersteinBall(DiscreteDistribution.from_points(X, nominal.weights), metric, theta)
    res = primal_oracle(ball, table_objective(P, vals), cands, max_vars=max_vars)
    return -res.value
