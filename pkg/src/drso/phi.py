"""phi-divergence ambiguity sets: worst-case distributions and radius calibration.

The worst case of sum_j p_j psi_j over {p in simplex : I_phi(p, q) <= theta}
has, for multipliers lam > 0 and beta,

    p_j = q_j (phi*)'((psi_j - beta) / lam)        on the support of q,
    p_j = 0                                        off the support, except
    p_jM = 1 - sum_j p_j   at jM = argmax{psi_j : q_j = 0}
                           when beta = psi_jM - lam lim_{t->inf} phi(t)/t.

The inner normalization sum p_j = 1 is solved for beta; the outer condition
I_phi = theta is solved for lam by bisection.
"""
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize, special

from .measures import DIVERGENCE_KINDS, SchemaError, phi_divergence, phi_function, phi_recession


def conjugate(kind: str, s):
    """phi*(s) = sup_{t >= 0} (s t - phi(t)) in closed form (inf outside its domain)."""
    s = np.asarray(s, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if kind == "kl":
            return np.exp(s - 1.0)
        if kind == "burg":
            return np.where(s < 0, -1.0 - np.log(-np.where(s < 0, s, -1.0)), np.inf)
        if kind == "chi2":
            return np.where(s < 1, 2.0 - 2.0 * np.sqrt(np.maximum(1.0 - s, 0.0)), np.inf)
        if kind == "modified-chi2":
            return np.where(s >= -2, s + s ** 2 / 4.0, -1.0)
        if kind == "hellinger":
            return np.where(s < 1, s / (1.0 - np.where(s < 1, s, 0.0)), np.inf)
        if kind == "tv":
            return np.where(s < -1, -1.0, np.where(s <= 1, s, np.inf))
    raise SchemaError(f"unknown divergence kind {kind!r}")


def conjugate_derivative(kind: str, s):
    """(phi*)'(s): the ratio t = p / q at slope s (inverse of phi', clipped at 0)."""
    s = np.asarray(s, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if kind == "kl":
            return np.exp(s - 1.0)
        if kind == "burg":
            return np.where(s < 0, -1.0 / np.where(s < 0, s, -1.0), np.inf)
        if kind == "chi2":
            return np.where(s < 1, 1.0 / np.sqrt(np.maximum(1.0 - s, 0.0)), np.inf)
        if kind == "modified-chi2":
            return np.maximum(0.0, 1.0 + s / 2.0)
        if kind == "hellinger":
            return np.where(s < 1, 1.0 / (1.0 - np.where(s < 1, s, 0.0)) ** 2, np.inf)
    raise SchemaError(f"no smooth conjugate derivative for {kind!r}")


def _phi_prime_at_one(kind):
    return {"kl": 1.0, "burg": -1.0, "chi2": 0.0, "modified-chi2": 0.0, "hellinger": 0.0}[kind]


@dataclass
class PhiWorstCase:
    p_star: np.ndarray
    lambda_star: float
    beta_star: float
    j_M: Optional[int]
    popped: float  # mass placed on j_M
    value: float
    divergence: float
    perturbed: bool = False  # exactly tied psi values were separated


def _inner(q, psi, lam, kind, on, j_M):
    """Solve sum_j p_j = 1 for beta at fixed lam. Returns (p, beta, popped)."""
    rec = phi_recession(kind)
    psi_on = psi[on]
    if kind == "kl":
        beta = lam * (special.logsumexp(psi_on / lam - 1.0, b=q[on]))
        p = np.zeros_like(q)
        p[on] = q[on] * np.exp((psi_on - beta) / lam - 1.0)
        return p / p.sum(), beta, 0.0

    def mass(beta):
        return float(np.sum(q[on] * conjugate_derivative(kind, (psi_on - beta) / lam)))

    if math.isfinite(rec):
        floor = psi_on.max() - lam * rec
        pop_beta = psi[j_M] - lam * rec if j_M is not None else -math.inf
        if j_M is not None and pop_beta >= floor and mass(pop_beta) <= 1.0:
            p = np.zeros_like(q)
            p[on] = q[on] * conjugate_derivative(kind, (psi_on - pop_beta) / lam)
            popped = 1.0 - p.sum()
            p[j_M] = popped
            return p, pop_beta, popped
        lo = max(floor, pop_beta)
        span = max(1.0, abs(lo)) * 1e-15
        a = lo + span
        while mass(a) < 1.0:
            span *= 0.5
            a = lo + span
            if span < 1e-300:
                break
    else:
        a = psi_on.min() - lam
        while mass(a) < 1.0:
            a -= 2 * (psi_on.max() - a) + lam
    b = psi_on.max() - lam * _phi_prime_at_one(kind) + lam
    while mass(b) > 1.0:
        b += 2 * (b - a) + lam
    beta = optimize.brentq(lambda x: mass(x) - 1.0, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps,
                           maxiter=500)
    p = np.zeros_like(q)
    p[on] = q[on] * conjugate_derivative(kind, (psi_on - beta) / lam)
    return p / p.sum(), beta, 0.0


def _tv_worst_case(q, psi, theta, on):
    order = np.lexsort((np.arange(psi.size), -psi))
    j_star = int(order[0])
    p = q.astype(float).copy()
    move = min(theta / 2.0, 1.0 - q[j_star])
    left = move
    donors = [j for j in np.lexsort((np.arange(psi.size), psi)) if j != j_star and q[j] > 0]
    marginal = psi[j_star]
    for j in donors:
        if left <= 0:
            break
        take = min(p[j], left)
        p[j] -= take
        left -= take
        marginal = psi[j]
    p[j_star] += move
    off = ~on
    j_M = int(np.nonzero(off)[0][np.argmax(psi[off])]) if off.any() else None
    if move < theta / 2.0 - 1e-15:
        lam = 0.0
    else:
        lam = (psi[j_star] - marginal) / 2.0
    beta = psi[j_star] - lam
    popped = float(p[j_M]) if j_M is not None and j_M == j_star else 0.0
    return PhiWorstCase(p, lam, beta, j_M, popped, float(p @ psi), phi_divergence(p, q, "tv"))


def phi_worst_case(q, psi, theta: float, kind: str, lam_floor: float = 1e-12) -> PhiWorstCase:
    """sup p.psi over the phi-divergence ball of radius theta around q."""
    if kind not in DIVERGENCE_KINDS:
        raise SchemaError(f"unknown divergence kind {kind!r}")
    q = np.asarray(q, dtype=float).ravel()
    psi = np.asarray(psi, dtype=float).ravel()
    if q.size != psi.size:
        raise SchemaError("q and psi must have the same length")
    if np.any(q < 0) or abs(q.sum() - 1.0) > 1e-9:
        raise SchemaError("q must be a probability vector")
    if theta < 0:
        raise SchemaError("theta must be nonnegative")
    on = q > 0
    if kind == "tv":
        return _tv_worst_case(q, psi, theta, on)
    # exactly tied values are separated by a tiny index-dependent shift (lowest index wins)
    perturbed = np.unique(psi).size < psi.size
    psi_t = psi - 1e-12 * np.arange(psi.size) * max(1.0, float(np.abs(psi).max())) if perturbed else psi
    off = ~on
    j_M = int(np.nonzero(off)[0][np.argmax(psi_t[off])]) if off.any() else None
    if not math.isfinite(phi_recession(kind)):
        j_M = None

    def solve(lam):
        p, beta, popped = _inner(q, psi_t, lam, kind, on, j_M)
        return p, beta, popped, phi_divergence(p, q, kind)

    if np.ptp(psi) == 0:
        # every feasible p attains the same value
        return PhiWorstCase(q.copy(), 0.0, float(psi[0]), j_M, 0.0, float(q @ psi), 0.0, False)
    if theta == 0:
        return PhiWorstCase(q.copy(), math.inf, math.nan, j_M, 0.0, float(q @ psi), 0.0, perturbed)
    lo = lam_floor
    sol = solve(lo)
    if sol[3] <= theta:
        p, beta, popped, div = sol
        return PhiWorstCase(p, 0.0, beta, j_M, popped, float(p @ psi), div, perturbed)
    hi = max(1.0, float(np.ptp(psi)))
    while solve(hi)[3] > theta:
        hi *= 4.0
    # bisection on log(lam); the divergence decreases in lam
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if solve(mid)[3] > theta:
            lo = mid
        else:
            hi = mid
        if hi / lo - 1.0 < 1e-15:
            break
    p, beta, popped, div = solve(hi)
    return PhiWorstCase(p, hi, beta, j_M, popped, float(p @ psi), div, perturbed)


# ---------------------------------------------------------------------------
# radius calibration from a concentration bound
# ---------------------------------------------------------------------------

@dataclass
class RadiusCalibration:
    theta: float
    delta: float
    talagrand: float
    bound: float


def talagrand_constant(samples, alphas=None) -> float:
    """lam = [inf_{z0, alpha} (1/alpha)(1 + log mean exp(alpha d^2(xi, z0)))]^{-1}.

    z0 ranges over the distinct sample values and alpha over a log grid.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if alphas is None:
        alphas = np.logspace(-8, 2, 801)
    best = math.inf
    for z0 in np.unique(x):
        d2 = (x - z0) ** 2
        lme = special.logsumexp(np.outer(alphas, d2), axis=1) - math.log(x.size)
        best = min(best, float(np.min((1.0 + lme) / alphas)))
    return 1.0 / best


def log_concentration_bound(theta, delta, support_max, lam, n):
    """log of max(8 e B / delta, 1)^(B / delta) exp(-(lam / 8) n (theta - delta)^2)."""
    cover = support_max / delta
    return cover * math.log(max(8 * math.e * support_max / delta, 1.0)) - lam / 8.0 * n * (theta - delta) ** 2


def best_delta(theta, support_max, lam, n):
    """(log bound, delta) minimizing the concentration bound over delta in (0, theta)."""
    grid = theta * np.linspace(0.005, 0.995, 199)
    vals = [log_concentration_bound(theta, d, support_max, lam, n) for d in grid]
    k = int(np.argmin(vals))
    a = grid[max(k - 1, 0)] if k > 0 else theta * 1e-6
    b = grid[min(k + 1, grid.size - 1)] if k < grid.size - 1 else theta * (1 - 1e-9)
    res = optimize.minimize_scalar(lambda d: log_concentration_bound(theta, d, support_max, lam, n),
                                   bounds=(a, b), method="bounded", options={"xatol": 1e-12 * theta})
    if res.fun <= vals[k]:
        return float(res.fun), float(res.x)
    return float(vals[k]), float(grid[k])


def calibrate_radius(samples, support_max: float, target: float = 0.05) -> RadiusCalibration:
    """Smallest theta whose concentration bound (minimized over delta) equals target."""
    x = np.asarray(samples, dtype=float).ravel()
    if not 0 < target < 1:
        raise SchemaError("target must lie in (0, 1)")
    lam = talagrand_constant(x)
    n = x.size
    goal = math.log(target)
    hi = float(support_max)
    if best_delta(hi, support_max, lam, n)[0] > goal:
        raise SchemaError("target bound is unreachable for theta up to the support size")
    lo = hi * 1e-9
    while hi - lo > 1e-13 * hi:
        mid = 0.5 * (lo + hi)
        if best_delta(mid, support_max, lam, n)[0] > goal:
            lo = mid
        else:
            hi = mid
    val, delta = best_delta(hi, support_max, lam, n)
    return RadiusCalibration(hi, delta, lam, math.exp(val))


# ---------------------------------------------------------------------------
# newsvendor comparison
# ---------------------------------------------------------------------------

def sample_demand(kind: str, n: int, support_max: int = 100, seed: int = 0) -> np.ndarray:
    """Binomial(support_max, 0.5) or Geometric(0.1) truncated to [0, support_max]."""
    rng = np.random.default_rng(seed)
    if kind == "binomial":
        return rng.binomial(support_max, 0.5, size=n).astype(float)
    if kind == "geometric":
        out = np.zeros(0)
        while out.size < n:
            g = rng.geometric(0.1, size=2 * n) - 1
            out = np.concatenate([out, g[g <= support_max]])
        return out[:n].astype(float)
    raise SchemaError(f"unknown demand model {kind!r}")


@dataclass
class Comparison:
    q: np.ndarray
    orders: dict  # method -> optimal order quantity
    worst: dict  # method -> worst-case distribution over bins
    values: dict


def phi_newsvendor(q, h, b, theta, kind):
    """min over integer x of the phi-worst-case newsvendor cost."""
    support = np.arange(q.size, dtype=float)
    best = None
    for x in range(q.size):
        psi = np.maximum(h * (x - support), b * (support - x))
        wc = phi_worst_case(q, psi, theta, kind)
        if best is None or wc.value < best[1] - 1e-12:
            best = (x, wc.value, wc)
    return best


def newsvendor_comparison(samples, support_max=100, h=1.0, b=1.0, theta_w=None,
                          theta_phi=0.1, kinds=("burg", "kl")) -> Comparison:
    """Worst-case demand distributions of the Wasserstein and phi-divergence newsvendors."""
    from .applications.newsvendor import NewsvendorInstance, bin_demand, newsvendor_solve

    q = bin_demand(samples, support_max)
    if theta_w is None:
        theta_w = calibrate_radius(samples, support_max).theta
    res = newsvendor_solve(NewsvendorInstance(q, h, b, theta_w))
    orders = {"wasserstein": res.x_star}
    worst = {"wasserstein": res.worst_case.distribution.dense_weights()}
    values = {"wasserstein": res.value}
    for kind in kinds:
        x, v, wc = phi_newsvendor(q, h, b, theta_phi, kind)
        orders[kind], worst[kind], values[kind] = x, wc.p_star, v
    return Comparison(q, orders, worst, values)
