"""Dual solver for worst-case expectations over a Wasserstein ball.

For a nominal distribution nu = sum_i w_i delta_{z_i}, a radius theta and an
order p, the worst-case expectation sup {E_mu Psi : W_p(mu, nu) <= theta} over
distributions supported on a finite candidate set equals

    min_{lam >= kappa} h(lam),   h(lam) = lam theta^p - sum_i w_i Phi(lam, z_i),
    Phi(lam, z) = min_j [lam d^p(x_j, z) - Psi(x_j)].

h is convex and piecewise linear in lam. Each atom contributes the upper
envelope of the lines Psi(x_j) - lam d^p(x_j, z_i), so the minimizer is found
exactly by walking the envelope breakpoints until the right derivative of h
turns nonnegative.
"""
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .lp import LPBudgetExceeded, simplex_max
from .measures import DiscreteDistribution, GroundMetric, PointSpace, SchemaError
from .objectives import Objective

EXISTS = "exists"
VANISHING = "vanishing-sequence"
UNBOUNDED = "unbounded"


class DualUnboundedBelow(ValueError):
    """h decreases without bound: no distribution on the candidates is within theta."""


class NoWorstCase(ValueError):
    """The supremum is not attained; only an epsilon-optimal sequence exists."""


class EpsilonTooSmall(ValueError):
    """The candidate set is too small to reach the requested accuracy."""

    def __init__(self, msg, min_slack):
        super().__init__(msg)
        self.min_slack = min_slack


@dataclass
class WassersteinBall:
    nominal: DiscreteDistribution
    metric: GroundMetric
    theta: float

    def __post_init__(self):
        if not (self.theta >= 0 and math.isfinite(self.theta)):
            raise SchemaError("theta must be finite and nonnegative")

    @property
    def p(self) -> float:
        return self.metric.p

    @property
    def budget(self) -> float:
        """Transport budget theta ** p."""
        return self.theta ** self.p


@dataclass
class RegularizedValue:
    """Phi(lam, zeta) with its minimizer set over the candidates."""

    lam: float
    zeta: np.ndarray
    phi: float
    argmin: np.ndarray
    d_min: float
    d_max: float
    near: int
    far: int


@dataclass
class DualSolution:
    lambda_star: float
    v_dual: float
    kappa_hat: float
    atoms: List[RegularizedValue]
    existence: str
    left_slope: float
    right_slope: float
    theta: float
    p: float
    lambda_max: float
    method: str = "envelope"


@dataclass
class WorstCaseDistribution:
    distribution: DiscreteDistribution
    provenance: List[tuple]  # (source atom, candidate index, fraction of source mass)
    split_index: Optional[int]
    cost: float
    value: float

    @property
    def n_atoms(self) -> int:
        return len(self.provenance)

    @property
    def n_splits(self) -> int:
        srcs = [s for s, _, _ in self.provenance]
        return sum(1 for s in set(srcs) if srcs.count(s) > 1)


# ---------------------------------------------------------------------------
# regularization
# ---------------------------------------------------------------------------

def _tie_tol(vals):
    return 1e-12 * max(1.0, float(np.abs(vals).max(initial=0.0)))


def _regularize_row(lam, zeta, cost_row, dist_row, psi):
    vals = lam * cost_row - psi if lam > 0 else -psi
    best = vals.min()
    tol = _tie_tol(np.abs(psi) + (lam * cost_row if lam > 0 else 0.0))
    arg = np.nonzero(vals <= best + tol)[0]
    d = dist_row[arg]
    near = int(arg[np.argmin(d)])  # argmin returns the first (lowest index) minimizer
    far = int(arg[np.argmax(d)])
    return RegularizedValue(lam=float(lam), zeta=np.asarray(zeta), phi=float(best), argmin=arg,
                            d_min=float(d.min()), d_max=float(d.max()), near=near, far=far)


def phi_regularize(lam: float, zeta, candidates: PointSpace, psi_values,
                   metric: GroundMetric) -> RegularizedValue:
    """Phi(lam, zeta) = min_j [lam d^p(x_j, zeta) - Psi(x_j)] and its argmin set.

    Ties within 1e-12 (relative to the magnitude of the terms) all count as
    minimizers; near/far pick the lowest-index minimizer at minimal/maximal
    distance.
    """
    if lam < 0:
        raise SchemaError("lambda must be nonnegative")
    z = np.atleast_2d(np.asarray(zeta, dtype=float))
    dist = metric.pairwise(z, candidates.points)[0]
    cost = dist ** metric.p
    return _regularize_row(lam, z[0], cost, dist, np.asarray(psi_values, dtype=float))


class _Problem:
    """Precomputed cost data shared by the dual routines."""

    def __init__(self, ball: WassersteinBall, objective: Objective, candidates: PointSpace):
        if candidates.dim != ball.nominal.space.dim:
            raise SchemaError("candidates and nominal points have different dimension")
        self.ball = ball
        self.objective = objective
        self.candidates = candidates
        self.psi = objective.values(candidates.points)
        self.zeta = ball.nominal.points
        self.w = ball.nominal.weights
        self.dist = ball.metric.pairwise(self.zeta, candidates.points)
        self.cost = self.dist ** ball.p if ball.p != 1 else self.dist
        self.budget = ball.budget

    def h(self, lam):
        vals = lam * self.cost - self.psi[None, :]
        return lam * self.budget - float(self.w @ vals.min(axis=1))

    def atoms(self, lam):
        return [_regularize_row(lam, self.zeta[i], self.cost[i], self.dist[i], self.psi)
                for i in range(self.zeta.shape[0])]


def dual_objective(lam: float, ball: WassersteinBall, objective: Objective,
                   candidates: PointSpace) -> float:
    """h(lam) = lam theta^p - sum_i w_i Phi(lam, z_i)."""
    if lam < 0:
        raise SchemaError("lambda must be nonnegative")
    return _Problem(ball, objective, candidates).h(lam)


# ---------------------------------------------------------------------------
# exact minimization via upper envelopes
# ---------------------------------------------------------------------------

def _upper_hull(c, psi):
    """Vertices of the upper-left concave hull of points (c_j, psi_j).

    Returns (c, psi) of hull vertices with c and psi strictly increasing and
    decreasing edge slopes: vertex k is the maximizer of psi - lam c for lam
    between the slopes of its two adjacent edges.
    """
    order = np.lexsort((np.arange(c.size), -psi, c))
    cs, ps = c[order], psi[order]
    run = np.maximum.accumulate(ps)
    keep = np.ones(cs.size, dtype=bool)
    keep[1:] = ps[1:] > run[:-1]
    cs, ps = cs[keep], ps[keep]
    hc, hp = [], []
    for x, y in zip(cs.tolist(), ps.tolist()):
        while len(hc) >= 2:
            ox, oy = hc[-2], hp[-2]
            ax, ay = hc[-1], hp[-1]
            if (ax - ox) * (y - oy) - (ay - oy) * (x - ox) >= 0:
                hc.pop()
                hp.pop()
            else:
                break
        hc.append(x)
        hp.append(y)
    return np.array(hc), np.array(hp)


def _envelope_minimize(prob: _Problem, lam_lo: float):
    budget = prob.budget
    slope0 = budget
    bps, incs = [], []
    for i in range(prob.zeta.shape[0]):
        if prob.w[i] == 0:
            continue
        hc, hp = _upper_hull(prob.cost[i], prob.psi)
        s = np.diff(hp) / np.diff(hc) if hc.size > 1 else np.zeros(0)
        k = int(np.count_nonzero(s > lam_lo))
        slope0 -= prob.w[i] * hc[k]
        if k:
            bps.append(s[:k])
            incs.append(prob.w[i] * np.diff(hc[:k + 1]))
    tol = 1e-12 * max(1.0, budget)
    if slope0 >= -tol:
        return lam_lo
    if not bps:
        raise DualUnboundedBelow("dual objective is unbounded below: no candidate "
                                 "distribution lies within the ball")
    bp = np.concatenate(bps)
    inc = np.concatenate(incs)
    order = np.argsort(bp, kind="stable")
    bp, inc = bp[order], inc[order]
    slopes = slope0 + np.cumsum(inc)
    hit = np.nonzero(slopes >= -tol)[0]
    if hit.size == 0:
        raise DualUnboundedBelow("dual objective is unbounded below: no candidate "
                                 "distribution lies within the ball")
    return float(bp[hit[0]])


def _golden_minimize(prob: _Problem, lo: float, hi: float, tol: float = 1e-10):
    invphi = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = prob.h(c), prob.h(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = prob.h(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = prob.h(d)
    lam = 0.5 * (a + b)
    # piecewise-linear refinement: intersect the affine pieces on both sides
    step = max(1e-8, 10 * tol)
    la, lb = max(lo, lam - step), lam + step
    ra = _slopes(prob, la)[1]
    lb_slope = _slopes(prob, lb)[0]
    cands = [la, lb, lam]
    if abs(ra - lb_slope) > 1e-15:
        ha, hb = prob.h(la), prob.h(lb)
        x = (hb - ha - lb_slope * lb + ra * la) / (ra - lb_slope)
        if la <= x <= lb:
            cands.append(x)
    if lo == 0.0 or ra >= 0:
        cands.append(lo)
    vals = [(prob.h(x), x) for x in cands]
    best = min(v for v, _ in vals)
    return min(x for v, x in vals if v <= best + 1e-13 * max(1.0, abs(best)))


def _slopes(prob: _Problem, lam):
    atoms = prob.atoms(lam)
    dmin = np.array([a.d_min for a in atoms]) ** prob.ball.p
    dmax = np.array([a.d_max for a in atoms]) ** prob.ball.p
    return prob.budget - prob.w @ dmax, prob.budget - prob.w @ dmin


def solve_dual(ball: WassersteinBall, objective: Objective, candidates: PointSpace,
               method: str = "auto", existence_tol: float = 1e-7) -> DualSolution:
    """Minimize h over lam >= max(0, kappa) and classify existence of a worst case.

    method is "auto"/"envelope" (exact breakpoint walk) or "golden"
    (golden-section search followed by a piecewise-linear refinement).
    """
    theta, p = ball.theta, ball.p
    if objective.unbounded:
        if theta > 0:
            return DualSolution(math.inf, math.inf, math.inf, [], UNBOUNDED, math.nan, math.nan,
                                theta, p, math.inf, method)
        kappa_hat = 0.0
    else:
        kappa_hat = 0.0 if objective.kappa is None else float(objective.kappa)
    prob = _Problem(ball, objective, candidates)
    lam_lo = max(0.0, kappa_hat)
    spread = float(prob.psi.max() - prob.psi.min())
    lam_max = lam_lo + (spread / prob.budget if prob.budget > 0 else 0.0) + 1.0

    if method in ("auto", "envelope"):
        lam = _envelope_minimize(prob, lam_lo)
        used = "envelope"
    elif method == "golden":
        # a decreasing h at lam_max means the minimizer lies beyond the search bracket
        if _slopes(prob, lam_max)[1] < -1e-12:
            lam = _envelope_minimize(prob, lam_lo)
        else:
            lam = _golden_minimize(prob, lam_lo, lam_max)
        used = "golden"
    else:
        raise SchemaError(f"unknown method {method!r}")

    atoms = prob.atoms(lam)
    v = lam * prob.budget - float(prob.w @ np.array([a.phi for a in atoms]))
    dmin = np.array([a.d_min for a in atoms]) ** p
    dmax = np.array([a.d_max for a in atoms]) ** p
    left = prob.budget - float(prob.w @ dmax)
    right = prob.budget - float(prob.w @ dmin)

    if theta == 0:
        v = float(prob.w @ objective.values(prob.zeta))
        existence = EXISTS
    elif lam > kappa_hat + existence_tol:
        existence = EXISTS
    else:
        edge = prob.atoms(lam_lo)
        lo_cost = float(prob.w @ (np.array([a.d_min for a in edge]) ** p))
        hi_cost = float(prob.w @ (np.array([a.d_max for a in edge]) ** p))
        slack = 1e-9 * max(1.0, prob.budget)
        if kappa_hat > 0:
            ok = lo_cost <= prob.budget + slack and prob.budget <= hi_cost + slack
        else:
            ok = lo_cost <= prob.budget + slack
        existence = EXISTS if ok else VANISHING
    return DualSolution(lambda_star=float(lam), v_dual=float(v), kappa_hat=kappa_hat, atoms=atoms,
                        existence=existence, left_slope=left, right_slope=right, theta=theta,
                        p=p, lambda_max=lam_max, method=used)


# ---------------------------------------------------------------------------
# worst-case distributions
# ---------------------------------------------------------------------------

def _assemble(prob: _Problem, moves):
    """moves: list of (source, candidate, fraction)."""
    idx = np.array([j for _, j, _ in moves], dtype=int)
    wts = np.array([prob.w[i] * f for i, j, f in moves])
    dist = DiscreteDistribution(prob.candidates, idx, wts / wts.sum(), renormalize_tol=1e-9)
    cost = float(sum(prob.w[i] * f * prob.cost[i, j] for i, j, f in moves))
    value = float(sum(prob.w[i] * f * prob.psi[j] for i, j, f in moves))
    return dist, cost, value


def _greedy_worst_case(prob: _Problem, sol: DualSolution) -> WorstCaseDistribution:
    budget = prob.budget
    atoms = sol.atoms
    n = len(atoms)
    active = [i for i in range(n) if prob.w[i] > 0]
    near = {i: atoms[i].near for i in active}
    far = {i: atoms[i].far for i in active}
    spent = sum(prob.w[i] * prob.cost[i, near[i]] for i in active)
    frac_far = {i: 0.0 for i in active}
    split = None
    snap = 1e-12 * max(1.0, budget)
    if sol.lambda_star > 0:
        gains = []
        for i in active:
            dc = prob.cost[i, far[i]] - prob.cost[i, near[i]]
            dv = prob.psi[far[i]] - prob.psi[near[i]]
            if dc > 0 and dv > 0:
                gains.append((i, dv / dc))
        if gains:
            scale = max(abs(r) for _, r in gains)
            gains.sort(key=lambda t: (-round(t[1] / scale, 9), t[0]))
        for i, _ in gains:
            need = budget - spent
            if need <= snap:
                break
            full = prob.w[i] * (prob.cost[i, far[i]] - prob.cost[i, near[i]])
            if full <= need + snap:
                frac_far[i] = 1.0
                spent += full
            else:
                frac_far[i] = need / full
                spent = budget
                split = i
                break
    moves = []
    for i in active:
        t = frac_far[i]
        if split == i:
            # a single minimizer at exactly the required cost avoids the split
            target = (1 - t) * prob.cost[i, near[i]] + t * prob.cost[i, far[i]]
            arg = atoms[i].argmin
            hit = arg[np.abs(prob.cost[i, arg] - target) <= 1e-12 * max(1.0, target)]
            if hit.size:
                moves.append((i, int(hit[0]), 1.0))
                split = None
                continue
            moves.append((i, near[i], 1.0 - t))
            moves.append((i, far[i], t))
        elif t == 1.0:
            moves.append((i, far[i], 1.0))
        else:
            moves.append((i, near[i], 1.0))
    dist, cost, value = _assemble(prob, moves)
    return WorstCaseDistribution(dist, moves, split, cost, value)


def construct_worst_case(ball: WassersteinBall, objective: Objective, candidates: PointSpace,
                         solution: Optional[DualSolution] = None) -> WorstCaseDistribution:
    """Worst-case distribution with at most N + 1 atoms and at most one split atom.

    Each nominal atom moves to its nearest or farthest minimizer of
    lam* d^p - Psi; atoms are moved to the far point in order of marginal
    value per unit cost until the budget theta^p is used, and the last one is
    split in the proportion that makes the cost exact.
    """
    if solution is None:
        solution = solve_dual(ball, objective, candidates)
    if solution.existence != EXISTS:
        raise NoWorstCase(f"no worst-case distribution: existence is {solution.existence!r}")
    prob = _Problem(ball, objective, candidates)
    return _greedy_worst_case(prob, solution)


@dataclass
class EpsilonOptimal:
    worst: WorstCaseDistribution
    value: float
    v_dual: float
    slack: float


def epsilon_optimal_sequence(ball: WassersteinBall, objective: Objective, candidates: PointSpace,
                             eps: float) -> EpsilonOptimal:
    """A feasible distribution within eps of the dual value when no worst case exists.

    The growth-rate lower bound on lam is dropped so the finite candidate set
    supplies the far points; the gap left by truncating the support to the
    candidate set is reported as slack.
    """
    sol = solve_dual(ball, objective, candidates)
    if sol.existence != VANISHING:
        raise SchemaError("epsilon_optimal_sequence applies only when no worst case exists")
    truncated = Objective(objective.func, kappa=None, lipschitz=objective.lipschitz,
                          name=objective.name)
    tsol = solve_dual(ball, truncated, candidates)
    prob = _Problem(ball, truncated, candidates)
    worst = _greedy_worst_case(prob, tsol)
    slack = sol.v_dual - worst.value
    if slack > eps:
        raise EpsilonTooSmall(f"candidate set reaches only within {slack:.3e} of the dual value",
                              min_slack=slack)
    return EpsilonOptimal(worst, worst.value, sol.v_dual, slack)


# ---------------------------------------------------------------------------
# primal LP oracle
# ---------------------------------------------------------------------------

@dataclass
class OracleResult:
    value: float
    distribution: DiscreteDistribution
    coupling: np.ndarray
    cost: float


def primal_oracle(ball: WassersteinBall, objective: Objective, candidates: PointSpace,
                  max_vars: int = 40000) -> OracleResult:
    """Solve the primal worst-case LP over couplings gamma_ij directly.

    maximize sum_ij gamma_ij Psi(x_j)
    s.t.     sum_j gamma_ij = w_i,  sum_ij gamma_ij d^p(z_i, x_j) <= theta^p,  gamma >= 0.
    """
    zeta = ball.nominal.points
    w = ball.nominal.weights
    n, m = zeta.shape[0], len(candidates)
    if n * m > max_vars:
        raise LPBudgetExceeded(f"{n * m} variables exceed the oracle budget of {max_vars}")
    psi = objective.values(candidates.points)
    C = ball.metric.cost(zeta, candidates.points)
    A_eq = np.zeros((n, n * m))
    for i in range(n):
        A_eq[i, i * m:(i + 1) * m] = 1.0
    res = simplex_max(np.tile(psi, n), A_ub=C.ravel()[None, :], b_ub=[ball.budget],
                      A_eq=A_eq, b_eq=w, max_vars=max_vars)
    G = res.x.reshape(n, m)
    pw = G.sum(axis=0)
    keep = np.nonzero(pw > 0)[0]
    dist = DiscreteDistribution(candidates, keep, pw[keep] / pw[keep].sum(), renormalize_tol=1e-8)
    return OracleResult(res.value, dist, G, float((G * C).sum()))


# ---------------------------------------------------------------------------
# growth rate and the finite-support robust program
# ---------------------------------------------------------------------------

@dataclass
class KappaEstimate:
    kappa: float
    tiers: np.ndarray
    radii: np.ndarray
    unbounded: bool


def estimate_kappa(objective: Objective, metric: GroundMetric, base, radii,
                   directions=None, n_random: int = 32, seed: int = 0) -> KappaEstimate:
    """Empirical growth rate of Psi away from a base point.

    Points are placed at each radius along the given directions (default: the
    signed coordinate axes plus seeded random directions), rescaled so their
    metric distance to the base equals the radius. The estimate is the largest
    ratio (Psi(x) - Psi(base)) / d^p on the outermost tier; it is flagged
    unbounded when that tier still exceeds the previous one by more than 10%.
    """
    base = np.atleast_1d(np.asarray(base, dtype=float))
    radii = np.sort(np.asarray(radii, dtype=float))
    s = base.size
    if directions is None:
        eye = np.eye(s)
        dirs = [eye, -eye]
        if n_random:
            dirs.append(np.random.default_rng(seed).standard_normal((n_random, s)))
        directions = np.vstack(dirs)
    U = np.atleast_2d(np.asarray(directions, dtype=float))
    unit = metric.pairwise(np.zeros((1, s)), U)[0]
    U = U[unit > 0] / unit[unit > 0, None]
    psi0 = objective.values(base[None, :])[0]
    tiers = []
    for r in radii:
        pts = base[None, :] + r * U
        d = metric.pairwise(base[None, :], pts)[0] ** metric.p
        tiers.append(float(np.max((objective.values(pts) - psi0) / d)))
    tiers = np.array(tiers)
    last = tiers[-1]
    grow = len(tiers) > 1 and last > 0 and last > 1.1 * max(tiers[-2], 0.0) and tiers[-2] > 0
    return KappaEstimate(math.inf if grow else float(last), tiers, radii, bool(grow))


def robust_lower_bound_vK(ball: WassersteinBall, objective: Objective, candidates: PointSpace,
                          K: int):
    """Feasible value of the robust program with N*K equally weighted points.

    The split atom of the worst case is rounded so that its far share is a
    multiple of 1/K (rounded down, which keeps the transport budget). Returns
    (v_K, bound) with bound = w_split (M + L D) / K, D the largest distance an
    atom travels; v_K >= v_dual - bound.
    """
    if K < 1:
        raise SchemaError("K must be a positive integer")
    if objective.lipschitz is None:
        raise SchemaError("objective needs declared Lipschitz data (L, M)")
    L, M = objective.lipschitz
    sol = solve_dual(ball, objective, candidates)
    worst = construct_worst_case(ball, objective, candidates, sol)
    prob = _Problem(ball, objective, candidates)
    D = max(prob.dist[i, j] for i, j, f in worst.provenance)
    if worst.split_index is None:
        return worst.value, 0.0
    i = worst.split_index
    legs = [(j, f) for s, j, f in worst.provenance if s == i]
    (jn, fn), (jf, ff) = legs
    ff_K = math.floor(K * ff + 1e-12) / K
    loss = prob.w[i] * (ff - ff_K) * (prob.psi[jf] - prob.psi[jn])
    return worst.value - loss, prob.w[i] * (M + L * D) / K
