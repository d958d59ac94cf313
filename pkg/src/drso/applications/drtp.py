"""Worst-case demand density for a continuum transportation cost.

The cost of serving a region with demand density f is proportional to
integral sqrt(f) dA. The adversary picks a probability density f on a grid of
cells within Wasserstein distance theta of the nominal atoms. With potentials
v on the atoms and Phi_v(x) = min_i [d^p(x, z_i) - v_i] the dual reads

    min_{lam > 0, v}  lam theta^p - lam sum_i w_i v_i + sum_c a_c / (4 lam Phi_v(x_c)),

which is jointly convex in (lam, u = lam v). Its gradient is (theta^p minus
the transport cost of f, cell mass minus atom weight), so at the optimum the
density f = 1 / (4 lam^2 Phi_v^2) integrates to one and uses the budget
exactly. It is minimized by damped Newton steps with backtracking on a
smoothed version of the objective.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from ..measures import DiscreteDistribution, GroundMetric, SchemaError


@dataclass
class ContinuumInstance:
    cells: np.ndarray  # (n_cells, dim) cell centers
    areas: np.ndarray  # cell measures
    nominal: DiscreteDistribution
    metric: GroundMetric
    theta: float

    def __post_init__(self):
        self.cells = np.atleast_2d(np.asarray(self.cells, dtype=float))
        self.areas = np.asarray(self.areas, dtype=float).ravel()
        if self.areas.size != self.cells.shape[0] or np.any(self.areas <= 0):
            raise SchemaError("need one positive area per cell")
        if self.theta <= 0:
            raise SchemaError("theta must be positive")


def square_grid(n: int, lo=(0.0, 0.0), hi=(1.0, 1.0)):
    """Centers and areas of an n x n grid of cells on a rectangle."""
    xs = np.linspace(lo[0], hi[0], n + 1)
    ys = np.linspace(lo[1], hi[1], n + 1)
    cx, cy = 0.5 * (xs[1:] + xs[:-1]), 0.5 * (ys[1:] + ys[:-1])
    X, Y = np.meshgrid(cx, cy, indexing="ij")
    area = (xs[1] - xs[0]) * (ys[1] - ys[0])
    return np.column_stack([X.ravel(), Y.ravel()]), np.full(n * n, area)


def disc_grid(n: int, center=(0.0, 0.0), radius=1.0):
    """Grid cells of an n x n square grid whose centers fall inside a disc."""
    c = np.asarray(center, dtype=float)
    pts, areas = square_grid(n, c - radius, c + radius)
    keep = np.linalg.norm(pts - c, axis=1) < radius
    return pts[keep], areas[keep]


@dataclass
class DRTPResult:
    value: float  # integral of sqrt(f*)
    dual_value: float
    lambda_star: float
    v_star: np.ndarray
    f_star: np.ndarray
    mass: float
    atom_masses: np.ndarray
    transport_cost: float
    slack: float  # theta^p - transport cost
    gap: float  # dual value - primal value
    iterations: int
    history: list = field(repr=False, default_factory=list)


class _Dual:
    """Dual objective with the minimum over atoms replaced by a soft minimum.

    Soft minimum at temperature tau: psi = m - tau log sum_i exp(-(s_i - m) / tau)
    with s_i = lam d_ci - u_i. Cells tied between atoms are split by the softmax
    weights, which keeps the optimality conditions exact at kinks; tau is driven
    to a negligible value by continuation.
    """

    def __init__(self, inst: ContinuumInstance):
        self.a = inst.areas
        self.w = inst.nominal.weights
        self.C = inst.metric.cost(inst.cells, inst.nominal.points)
        self.budget = inst.theta ** inst.metric.p

    def soft(self, x, tau):
        lam, u = x[0], x[1:]
        s = lam * self.C - u[None, :]
        m = s.min(axis=1)
        e = np.exp(-(s - m[:, None]) / tau) if tau > 0 else (s == m[:, None]).astype(float)
        S = e.sum(axis=1)
        pi = e / S[:, None]
        psi = m - tau * np.log(S) if tau > 0 else m
        return psi, pi

    def value(self, x, tau=0.0):
        if x[0] <= 0:
            return np.inf
        psi, _ = self.soft(x, tau)
        if np.any(psi <= 0):
            return np.inf
        return x[0] * self.budget - self.w @ x[1:] + float(np.sum(self.a / (4 * psi)))

    def grad_hess(self, x, tau):
        psi, pi = self.soft(x, tau)
        n = self.w.size
        dbar = np.sum(pi * self.C, axis=1)
        f = 1.0 / (4 * psi ** 2)
        g = np.empty(n + 1)
        g[0] = self.budget - np.sum(self.a * f * dbar)
        g[1:] = (self.a * f) @ pi - self.w
        # gradient of psi per cell: (dbar, -pi)
        Gb = np.empty((psi.size, n + 1))
        Gb[:, 0] = dbar
        Gb[:, 1:] = -pi
        k1 = self.a / (2 * psi ** 3)
        H = (Gb * k1[:, None]).T @ Gb
        if tau > 0:
            # curvature of the soft minimum: covariance of the piece gradients
            k2 = self.a / (4 * psi ** 2 * tau)
            M = np.zeros((n + 1, n + 1))
            M[0, 0] = np.sum(k2 * np.sum(pi * self.C ** 2, axis=1))
            M[0, 1:] = M[1:, 0] = -(k2 @ (pi * self.C))
            M[1:, 1:] = np.diag(k2 @ pi)
            H += M - (Gb * k2[:, None]).T @ Gb
        return g, H, psi, pi


def _newton(prob, x, tau, tol, max_iter, history):
    fx = prob.value(x, tau)
    it = 0
    for it in range(1, max_iter + 1):
        g, H, _, _ = prob.grad_hess(x, tau)
        if np.max(np.abs(g)) <= tol:
            return x, it - 1
        n = H.shape[0]
        try:
            step = -np.linalg.solve(H + 1e-14 * max(1.0, np.trace(H)) * np.eye(n), g)
        except np.linalg.LinAlgError:
            step = -g
        slope = g @ step
        if not slope < 0:
            step, slope = -g, -(g @ g)
        t = 1.0
        while True:
            xn = x + t * step
            fn = prob.value(xn, tau)
            if fn <= fx + 1e-4 * t * slope:
                break
            t *= 0.5
            if t < 1e-20:
                return x, it
        x, fx = xn, fn
        history.append(fx)
    return x, it


def transport_cost_lp(inst: ContinuumInstance, density) -> float:
    """W_p^p between a cell density (normalized to mass one) and the nominal, by LP."""
    return _transport_lp(inst, inst.areas * np.asarray(density, dtype=float))[0]


def _uniform_fits(inst: ContinuumInstance):
    """Transport cost from the normalized uniform density to the nominal atoms."""
    return _transport_lp(inst, inst.areas)


def _transport_lp(inst: ContinuumInstance, cell_mass):
    a = cell_mass / cell_mass.sum()
    C = inst.metric.cost(inst.cells, inst.nominal.points)
    n, m = C.shape
    A_eq = np.zeros((n + m, n * m))
    for i in range(n):
        A_eq[i, i * m:(i + 1) * m] = 1.0
    for j in range(m):
        A_eq[n + j, j::m] = 1.0
    res = optimize.linprog(C.ravel(), A_eq=A_eq, b_eq=np.concatenate([a, inst.nominal.weights]),
                           bounds=(0, None), method="highs")
    if res.status != 0:
        raise RuntimeError("transport LP failed: " + res.message)
    return float(res.fun), res.x.reshape(n, m)


def drtp_solve(instance: ContinuumInstance, tol: float = 1e-11, max_iter: int = 100) -> DRTPResult:
    """Worst-case density maximizing integral sqrt(f) dA over the Wasserstein ball."""
    prob = _Dual(instance)
    n = prob.w.size
    budget = prob.budget
    total_area = float(prob.a.sum())
    uni_cost, plan = _uniform_fits(instance)
    if uni_cost <= budget:
        # the budget does not bind: the uniform density is optimal and lam* = 0
        f = np.full(prob.a.size, 1.0 / total_area)
        value = float(np.sum(prob.a * np.sqrt(f)))
        return DRTPResult(value=value, dual_value=value, lambda_star=0.0,
                          v_star=np.full(n, np.nan), f_star=f, mass=1.0,
                          atom_masses=plan.sum(axis=0), transport_cost=uni_cost,
                          slack=budget - uni_cost, gap=0.0, iterations=0)
    dmin = prob.C.min(axis=1)
    if np.any(dmin <= 0):
        raise SchemaError("cell centers must not coincide with nominal atoms")
    x = np.concatenate([[1.0 / max(budget, 1e-3)], -0.5 * np.ones(n)])
    history = [prob.value(x)]
    iters = 0
    # start smooth and cool down; each stage warm-starts the next
    taus = [1e-1 * 10.0 ** (-k) for k in range(12)]
    for tau in taus:
        x, k = _newton(prob, x, tau, tol if tau == taus[-1] else 1e-9, max_iter, history)
        iters += k
    g, _, psi, pi = prob.grad_hess(x, taus[-1])
    lam = x[0]
    f = 1.0 / (4 * psi ** 2)
    value = float(np.sum(prob.a * np.sqrt(f)))
    masses = (prob.a * f) @ pi
    cost = float(np.sum(prob.a * f * np.sum(pi * prob.C, axis=1)))
    dual = prob.value(x, 0.0)
    return DRTPResult(value=value, dual_value=float(dual), lambda_star=float(lam),
                      v_star=x[1:] / lam, f_star=f, mass=float(np.sum(prob.a * f)),
                      atom_masses=masses, transport_cost=cost, slack=budget - cost,
                      gap=float(dual) - value, iterations=iters, history=history)
