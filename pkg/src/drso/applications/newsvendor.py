"""Distributionally robust newsvendor on the integer demand support {0, ..., B}."""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..dual import (DualSolution, WassersteinBall, WorstCaseDistribution, construct_worst_case,
                    solve_dual)
from ..measures import DiscreteDistribution, GroundMetric, PointSpace, SchemaError
from ..objectives import Objective

MAX_SUPPORT = 10_000


def newsvendor_loss(x: float, h: float, b: float) -> Objective:
    """Psi_x(j) = max(h (x - j), b (j - x)): holding cost h, backorder cost b."""
    return Objective(lambda pts: np.maximum(h * (x - pts[:, 0]), b * (pts[:, 0] - x)),
                     name=f"newsvendor(x={x})")


def bin_demand(samples, support_max: int) -> np.ndarray:
    """Empirical bin weights of raw demand samples rounded and clipped to {0..B}."""
    s = np.asarray(samples, dtype=float).ravel()
    if s.size == 0:
        raise SchemaError("no demand samples")
    j = np.clip(np.rint(s), 0, support_max).astype(int)
    return np.bincount(j, minlength=support_max + 1) / s.size


@dataclass
class NewsvendorInstance:
    q: np.ndarray  # nominal weight of each bin 0..B
    h: float
    b: float
    theta: float
    p: float = 1.0

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float).ravel()
        if self.q.size - 1 > MAX_SUPPORT:
            raise SchemaError(f"support size exceeds {MAX_SUPPORT}")
        if self.h < 0 or self.b < 0:
            raise SchemaError("holding and backorder costs must be nonnegative")
        if self.theta < 0:
            raise SchemaError("theta must be nonnegative")

    @property
    def support_max(self) -> int:
        return self.q.size - 1

    @classmethod
    def from_samples(cls, samples, support_max, h, b, theta, p=1.0):
        return cls(bin_demand(samples, support_max), h, b, theta, p)

    def ball(self) -> WassersteinBall:
        space = PointSpace(np.arange(self.q.size, dtype=float), check_distinct=False)
        idx = np.nonzero(self.q > 0)[0]
        nominal = DiscreteDistribution(space, idx, self.q[idx])
        return WassersteinBall(nominal, GroundMetric("absolute-1d", self.p), self.theta)


@dataclass
class NewsvendorResult:
    x_star: int
    value: float
    worst_case: Optional[WorstCaseDistribution]
    dual: DualSolution
    values: np.ndarray = field(repr=False)  # worst-case cost of every order quantity


def newsvendor_solve(instance: NewsvendorInstance, orders=None) -> NewsvendorResult:
    """Minimize the worst-case expected cost over integer order quantities.

    Each order quantity is evaluated with the exact dual solver; ties go to
    the smallest quantity. The worst-case demand distribution at the optimum
    is returned as well.
    """
    ball = instance.ball()
    cands = ball.nominal.space
    orders = np.arange(instance.q.size) if orders is None else np.asarray(orders, dtype=int)
    vals = np.empty(orders.size)
    sols = []
    for k, x in enumerate(orders):
        sol = solve_dual(ball, newsvendor_loss(float(x), instance.h, instance.b), cands)
        vals[k] = sol.v_dual
        sols.append(sol)
    best = float(vals.min())
    k = int(np.nonzero(vals <= best + 1e-12 * max(1.0, abs(best)))[0][0])
    x = int(orders[k])
    worst = construct_worst_case(ball, newsvendor_loss(float(x), instance.h, instance.b), cands,
                                 sols[k])
    return NewsvendorResult(x, float(vals[k]), worst, sols[k], vals)
