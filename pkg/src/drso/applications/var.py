"""Worst-case value-at-risk of a portfolio loss over a Wasserstein ball.

Returns xi, portfolio weights w with |w|_1 = 1, loss Z = -w.xi, l-infinity
ground metric (so moving the loss by t costs t). The worst-case VaR is the
smallest q for which every distribution in the ball has P(Z <= q) >= 1 - alpha,
found by bisection on q.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate, stats

from ..measures import SchemaError

BISECTION_TOL = 1e-10


@dataclass
class VaRQuery:
    w: np.ndarray
    alpha: float
    theta: float
    p: float = 1.0
    mean: Optional[np.ndarray] = None  # Gaussian nominal
    cov: Optional[np.ndarray] = None
    samples: Optional[np.ndarray] = None  # empirical nominal
    weights: Optional[np.ndarray] = None
    metric: str = "linf"
    tie_rule: str = "exact"  # or "literal"

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=float).ravel()
        if self.metric != "linf":
            raise SchemaError("worst-case VaR is implemented for the l-infinity metric only")
        if abs(np.abs(self.w).sum() - 1.0) > 1e-9:
            raise SchemaError("portfolio weights must have unit l1 norm")
        if not 0 < self.alpha < 1:
            raise SchemaError("alpha must lie in (0, 1)")
        if self.theta <= 0:
            raise SchemaError("theta must be positive")
        if self.p < 1:
            raise SchemaError("p must be >= 1")
        gauss = self.mean is not None and self.cov is not None
        emp = self.samples is not None
        if gauss == emp:
            raise SchemaError("give either (mean, cov) or samples")
        if self.tie_rule not in ("exact", "literal"):
            raise SchemaError("tie_rule must be 'exact' or 'literal'")

    @property
    def gaussian(self) -> bool:
        return self.samples is None


@dataclass
class VaRResult:
    var_wc: float
    var_nominal: float
    certificate: float  # left side of the robustness condition at var_wc
    target: float  # theta ** p
    flagged: bool = False  # literal tie rule hit a vanishing denominator


def gaussian_loss_params(w, mean, cov):
    m = -float(np.dot(w, mean))
    s = float(np.sqrt(np.dot(w, np.asarray(cov) @ w)))
    if s <= 0:
        raise SchemaError("portfolio variance must be positive")
    return m, s


def gaussian_condition(q, var, m, s, p=1.0):
    """E[((q - Z)^+)^p 1{Z >= VaR}] for Z ~ N(m, s^2)."""
    if q <= var:
        return 0.0
    if p == 1.0:
        a, b = (var - m) / s, (q - m) / s
        return (q - m) * (stats.norm.cdf(b) - stats.norm.cdf(a)) - s * (stats.norm.pdf(a) - stats.norm.pdf(b))
    val, _ = integrate.quad(lambda y: (q - y) ** p * stats.norm.pdf(y, m, s), var, q,
                            epsabs=1e-13, epsrel=1e-12, limit=200)
    return val


def empirical_var(z, pi, alpha):
    order = np.argsort(z, kind="stable")
    cum = np.cumsum(pi[order])
    k = int(np.nonzero(cum >= 1 - alpha - 1e-12)[0][0])
    return float(z[order][k])


def empirical_condition(q, z, pi, var, alpha, p, budget, tie_rule="exact"):
    """Cost for the adversary to push more than alpha of the mass above q.

    Atoms above VaR are moved just past q; the remaining alpha - nu(Z > VaR)
    comes from the atom at VaR. Returns (value, flagged).
    """
    above = z > var
    at = z == var
    A = float(np.sum(pi[above] * np.maximum(q - z[above], 0.0) ** p))
    gap = alpha - float(pi[above].sum())
    D = max(q - var, 0.0) ** p
    if tie_rule == "exact":
        return A + max(gap, 0.0) * D, False
    denom = abs(budget - A)
    flagged = denom < 1e-12
    beta0 = 1.0 if flagged else min(1.0, gap * D / denom)
    return A + beta0 * float(pi[at].sum()) * D, flagged


def _condition(query: VaRQuery):
    """(condition function, nominal VaR, scale, budget) for a query."""
    budget = query.theta ** query.p
    if query.gaussian:
        m, s = gaussian_loss_params(query.w, query.mean, query.cov)
        var = m + s * stats.norm.ppf(1 - query.alpha)
        cond = lambda q: (gaussian_condition(q, var, m, s, query.p), False)
        return cond, var, s, budget
    X = np.atleast_2d(np.asarray(query.samples, dtype=float))
    z = -X @ query.w
    pi = (np.full(z.size, 1.0 / z.size) if query.weights is None
          else np.asarray(query.weights, dtype=float))
    if abs(pi.sum() - 1) > 1e-9 or np.any(pi < 0):
        raise SchemaError("sample weights must be a probability vector")
    var = empirical_var(z, pi, query.alpha)
    cond = lambda q: empirical_condition(q, z, pi, var, query.alpha, query.p, budget,
                                         query.tie_rule)
    return cond, var, max(float(z.max() - z.min()), 1.0), budget


def wc_var(query: VaRQuery) -> VaRResult:
    cond, var, scale, budget = _condition(query)
    lo, hi = var, var + scale
    while cond(hi)[0] < budget:
        hi = var + 2 * (hi - var)
        if hi - var > 1e12 * scale:
            raise SchemaError("worst-case VaR is unbounded")
    while hi - lo > BISECTION_TOL * max(1.0, abs(hi)):
        mid = 0.5 * (lo + hi)
        if cond(mid)[0] >= budget:
            hi = mid
        else:
            lo = mid
    val, flagged = cond(hi)
    return VaRResult(float(hi), float(var), float(val), budget, flagged)


def var_grid_scan(query: VaRQuery, step: float, max_steps: int = 10_000_000) -> float:
    """First point of the grid var + k step at which the robustness condition holds.

    A coarse pass (1000 steps at a time) finds the crossing cell, which is then
    scanned at full resolution.
    """
    cond, var, _, budget = _condition(query)
    coarse = 1000 * step
    k = 1
    while cond(var + k * coarse)[0] < budget:
        k += 1
        if k * 1000 > max_steps:
            raise SchemaError("grid scan did not reach the condition")
    base = var + (k - 1) * coarse
    for j in range(1, 1001):
        q = base + j * step
        if cond(q)[0] >= budget:
            return float(q)
    return float(var + k * coarse)
