"""Point spaces, ground metrics, discrete distributions and transport plans.

Includes the order-p Wasserstein distance between finitely supported
distributions (a transportation network simplex), a sorted-quantile fast path
on the real line, and the phi-divergence family used for comparisons.
"""
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

METRIC_KINDS = ("euclidean", "l1", "linf", "absolute-1d", "discrete", "explicit-matrix")
DIVERGENCE_KINDS = ("kl", "burg", "chi2", "modified-chi2", "hellinger", "tv")


class SchemaError(ValueError):
    """Malformed or invalid input data."""


class PointSpace:
    """An ordered set of distinct points of common dimension."""

    def __init__(self, points, check_distinct: bool = True):
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise SchemaError("points must be a non-empty (n, dim) array")
        if not np.all(np.isfinite(pts)):
            raise SchemaError("points must be finite")
        if check_distinct:
            uniq = np.unique(pts, axis=0)
            if uniq.shape[0] != pts.shape[0]:
                raise SchemaError("points of a PointSpace must be distinct")
        self.points = pts
        self.points.setflags(write=False)

    def __len__(self):
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @classmethod
    def grid_1d(cls, lo: float, hi: float, step: float) -> "PointSpace":
        n = int(round((hi - lo) / step))
        return cls(lo + step * np.arange(n + 1), check_distinct=False)


@dataclass(frozen=True)
class GroundMetric:
    """Ground distance d with transport order p >= 1.

    For the explicit-matrix kind the first coordinate of a point is read as an
    integer label indexing the matrix.
    """

    kind: str = "euclidean"
    p: float = 1.0
    matrix: Optional[np.ndarray] = field(default=None, compare=False)
    allow_asymmetric: bool = False

    def __post_init__(self):
        if self.kind not in METRIC_KINDS:
            raise SchemaError(f"unknown metric kind {self.kind!r}")
        if not (self.p >= 1.0 and np.isfinite(self.p)):
            raise SchemaError("transport order p must be >= 1")
        if self.kind == "explicit-matrix":
            if self.matrix is None:
                raise SchemaError("explicit-matrix metric needs a matrix")
            D = np.asarray(self.matrix, dtype=float)
            object.__setattr__(self, "matrix", D)
            check_metric_matrix(D, allow_asymmetric=self.allow_asymmetric)

    def pairwise(self, X, Y) -> np.ndarray:
        """Distance matrix d(X[i], Y[j])."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        if X.shape[0] == 1 and X.shape[1] > 1 and self.kind == "absolute-1d":
            X = X.T
        if Y.shape[0] == 1 and Y.shape[1] > 1 and self.kind == "absolute-1d":
            Y = Y.T
        if self.kind == "explicit-matrix":
            i = X[:, 0].astype(int)
            j = Y[:, 0].astype(int)
            return self.matrix[np.ix_(i, j)]
        if self.kind == "discrete":
            return np.any(X[:, None, :] != Y[None, :, :], axis=2).astype(float)
        diff = X[:, None, :] - Y[None, :, :]
        if self.kind == "absolute-1d":
            if X.shape[1] != 1:
                raise SchemaError("absolute-1d metric needs one-dimensional points")
            return np.abs(diff[:, :, 0])
        if self.kind == "l1":
            return np.abs(diff).sum(axis=2)
        if self.kind == "linf":
            return np.abs(diff).max(axis=2)
        return np.sqrt((diff ** 2).sum(axis=2))

    def cost(self, X, Y) -> np.ndarray:
        """Transport cost matrix d(X[i], Y[j]) ** p."""
        D = self.pairwise(X, Y)
        return D if self.p == 1 else D ** self.p

    def dual_norm_order(self) -> float:
        """Exponent of the dual norm for norm-induced metrics."""
        return {"euclidean": 2.0, "l1": np.inf, "linf": 1.0, "absolute-1d": 1.0}[self.kind]


def check_metric_matrix(D, allow_asymmetric=False, tol=1e-12):
    D = np.asarray(D, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise SchemaError("metric matrix must be square")
    if np.any(D < 0) or not np.all(np.isfinite(D)):
        raise SchemaError("metric matrix must be finite and nonnegative")
    if np.any(np.abs(np.diag(D)) > tol):
        raise SchemaError("metric matrix must have a zero diagonal")
    if not allow_asymmetric and np.any(np.abs(D - D.T) > tol):
        raise SchemaError("metric matrix must be symmetric")
    n = D.shape[0]
    for k in range(n):
        if np.any(D > D[:, [k]] + D[[k], :] + tol * max(1.0, D.max())):
            raise SchemaError("metric matrix violates the triangle inequality")
    return D


class DiscreteDistribution:
    """Finitely supported probability measure on a PointSpace.

    Atoms are (index into the space, weight). Weights are renormalized when
    their sum is within 1e-12 of one and rejected otherwise.
    """

    def __init__(self, space: PointSpace, index, weights, renormalize_tol: float = 1e-12):
        index = np.asarray(index, dtype=int).ravel()
        w = np.asarray(weights, dtype=float).ravel()
        if index.size != w.size or w.size == 0:
            raise SchemaError("index and weights must be non-empty and of equal length")
        if np.any(index < 0) or np.any(index >= len(space)):
            raise SchemaError("atom index out of range")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise SchemaError("weights must be finite and nonnegative")
        s = w.sum()
        if abs(s - 1.0) > renormalize_tol:
            raise SchemaError(f"weights sum to {s!r}, not 1")
        w = w / s
        # merge repeated atoms
        if np.unique(index).size != index.size:
            uniq, inv = np.unique(index, return_inverse=True)
            merged = np.zeros(uniq.size)
            np.add.at(merged, inv, w)
            index, w = uniq, merged
        self.space = space
        self.index = index
        self.weights = w

    @classmethod
    def from_points(cls, points, weights=None, renormalize_tol: float = 1e-12):
        """Build from raw (possibly repeated) points; repeats are merged."""
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if weights is None:
            weights = np.full(pts.shape[0], 1.0 / pts.shape[0])
        uniq, inv = np.unique(pts, axis=0, return_inverse=True)
        inv = np.asarray(inv).ravel()
        return cls(PointSpace(uniq, check_distinct=False), inv, weights, renormalize_tol)

    @classmethod
    def empirical(cls, samples):
        """Uniform weights 1/N on the samples, kept as separate atoms.

        Repeated samples stay separate so that atom i is sample i.
        """
        pts = np.asarray(samples, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        n = pts.shape[0]
        obj = cls.__new__(cls)
        obj.space = PointSpace(pts, check_distinct=False)
        obj.index = np.arange(n)
        obj.weights = np.full(n, 1.0 / n)
        return obj

    @property
    def points(self) -> np.ndarray:
        return self.space.points[self.index]

    def __len__(self):
        return self.index.size

    def expectation(self, values_at_atoms) -> float:
        return float(np.dot(self.weights, values_at_atoms))

    def dense_weights(self) -> np.ndarray:
        """Weight vector over the whole space."""
        out = np.zeros(len(self.space))
        np.add.at(out, self.index, self.weights)
        return out


@dataclass
class TransportPlan:
    """Sparse coupling: mass[k] moves from source row[k] to target col[k]."""

    rows: np.ndarray
    cols: np.ndarray
    mass: np.ndarray
    shape: tuple
    cost: float

    def dense(self) -> np.ndarray:
        G = np.zeros(self.shape)
        np.add.at(G, (self.rows, self.cols), self.mass)
        return G

    def check_marginals(self, a, b, tol=1e-9) -> bool:
        G = self.dense()
        return bool(np.all(np.abs(G.sum(1) - a) <= tol) and np.all(np.abs(G.sum(0) - b) <= tol))


# ---------------------------------------------------------------------------
# transportation network simplex
# ---------------------------------------------------------------------------

def _northwest_corner(a, b):
    m, n = a.size, b.size
    ra, rb = a.astype(float).copy(), b.astype(float).copy()
    cells, vals = [], []
    i = j = 0
    while True:
        x = min(ra[i], rb[j])
        x = max(x, 0.0)
        cells.append((i, j))
        vals.append(x)
        ra[i] -= x
        rb[j] -= x
        if i == m - 1 and j == n - 1:
            break
        if j == n - 1 or (i < m - 1 and ra[i] <= rb[j]):
            i += 1
        else:
            j += 1
    return cells, vals


def _tree_path(adj, start, goal):
    """Path of nodes from start to goal in the basis tree."""
    parent = {start: None}
    dq = deque([start])
    while dq:
        u = dq.popleft()
        if u == goal:
            break
        for v in adj[u]:
            if v not in parent:
                parent[v] = u
                dq.append(v)
    path = [goal]
    while path[-1] != start:
        path.append(parent[path[-1]])
    return path[::-1]


def transport_simplex(a, b, C, tol: float = 1e-13, max_iter: Optional[int] = None):
    """Solve min <C, G> over couplings of a and b.

    Transportation (network) simplex: north-west-corner start, u-v potentials
    on the basis tree, Bland's rule (lowest-index entering cell with negative
    reduced cost, lowest-index leaving cell among ratio ties).
    Returns (cost, TransportPlan).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    C = np.asarray(C, dtype=float)
    m, n = a.size, b.size
    if C.shape != (m, n):
        raise SchemaError("cost matrix shape does not match marginals")
    cells, vals = _northwest_corner(a, b)
    X = {cell: v for cell, v in zip(cells, vals)}
    adj = [set() for _ in range(m + n)]
    for (i, j) in X:
        adj[i].add(m + j)
        adj[m + j].add(i)
    rtol = tol * max(1.0, float(np.abs(C).max(initial=0.0)))
    if max_iter is None:
        max_iter = 100 * (m + n) * max(1, min(m, n)) + 1000
    it = 0
    while True:
        # potentials: u_i + v_j = C_ij on basic cells
        u = np.full(m, np.nan)
        v = np.full(n, np.nan)
        u[0] = 0.0
        dq = deque([0])
        seen = {0}
        while dq:
            node = dq.popleft()
            for nb in adj[node]:
                if nb in seen:
                    continue
                seen.add(nb)
                if node < m:
                    v[nb - m] = C[node, nb - m] - u[node]
                else:
                    u[nb] = C[nb, node - m] - v[node - m]
                dq.append(nb)
        R = C - u[:, None] - v[None, :]
        neg = np.argwhere(R < -rtol)
        if neg.shape[0] == 0:
            break
        ei, ej = (int(neg[0, 0]), int(neg[0, 1]))  # row-major lowest index
        path = _tree_path(adj, m + ej, ei)  # column ej ... row ei
        # cycle: (ei,ej) +, then alternate along path from ej back to ei
        cyc = []
        for k in range(len(path) - 1):
            p, q = path[k], path[k + 1]
            cell = (q, p - m) if p >= m else (p, q - m)
            cyc.append(cell)
        minus = cyc[0::2]
        plus = cyc[1::2]
        theta = min(X[c] for c in minus)
        ties = [c for c in minus if X[c] <= theta + 0.0]
        leave = min(ties)
        for c in minus:
            X[c] -= theta
        for c in plus:
            X[c] += theta
        X[(ei, ej)] = theta
        del X[leave]
        adj[leave[0]].discard(m + leave[1])
        adj[m + leave[1]].discard(leave[0])
        adj[ei].add(m + ej)
        adj[m + ej].add(ei)
        it += 1
        if it > max_iter:
            raise RuntimeError("transport simplex exceeded its iteration budget")
    keys = sorted(k for k, val in X.items() if val > 0)
    rows = np.array([k[0] for k in keys], dtype=int)
    cols = np.array([k[1] for k in keys], dtype=int)
    mass = np.array([X[k] for k in keys], dtype=float)
    cost = float(np.dot(mass, C[rows, cols])) if keys else 0.0
    return cost, TransportPlan(rows, cols, mass, (m, n), cost)


def _as_distribution(mu) -> DiscreteDistribution:
    if isinstance(mu, DiscreteDistribution):
        return mu
    raise SchemaError("expected a DiscreteDistribution")


def wasserstein_distance(mu: DiscreteDistribution, nu: DiscreteDistribution,
                         metric: GroundMetric):
    """Order-p Wasserstein distance W_p(mu, nu) and an optimal plan.

    The returned plan's cost field holds W_p ** p.
    """
    mu, nu = _as_distribution(mu), _as_distribution(nu)
    if mu.space.dim != nu.space.dim:
        raise SchemaError("distributions live in spaces of different dimension")
    C = metric.cost(mu.points, nu.points)
    cost, plan = transport_simplex(mu.weights, nu.weights, C)
    return max(cost, 0.0) ** (1.0 / metric.p), plan


def wasserstein_1d_fast(mu: DiscreteDistribution, nu: DiscreteDistribution, p: float = 1.0):
    """W_p on the real line via the monotone (sorted quantile) coupling.

    Returns (value, plan) with the plan expressed in atom order of mu and nu.
    """
    if mu.space.dim != 1 or nu.space.dim != 1:
        raise SchemaError("wasserstein_1d_fast needs one-dimensional supports")
    xa, xb = mu.points[:, 0], nu.points[:, 0]
    oa, ob = np.argsort(xa, kind="stable"), np.argsort(xb, kind="stable")
    cells, vals = _northwest_corner(mu.weights[oa], nu.weights[ob])
    rows = np.array([oa[i] for i, _ in cells], dtype=int)
    cols = np.array([ob[j] for _, j in cells], dtype=int)
    mass = np.array(vals)
    keep = mass > 0
    rows, cols, mass = rows[keep], cols[keep], mass[keep]
    cost = float(np.dot(mass, np.abs(xa[rows] - xb[cols]) ** p))
    plan = TransportPlan(rows, cols, mass, (len(mu), len(nu)), cost)
    return max(cost, 0.0) ** (1.0 / p), plan


# ---------------------------------------------------------------------------
# phi-divergences
# ---------------------------------------------------------------------------

def phi_function(kind: str, t):
    """phi(t) for t >= 0 (np.inf where undefined at t = 0)."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        if kind == "kl":
            return np.where(t > 0, t * np.log(np.where(t > 0, t, 1.0)), 0.0)
        if kind == "burg":
            return np.where(t > 0, -np.log(np.where(t > 0, t, 1.0)), np.inf)
        if kind == "chi2":
            return np.where(t > 0, (t - 1.0) ** 2 / np.where(t > 0, t, 1.0), np.inf)
        if kind == "modified-chi2":
            return (t - 1.0) ** 2
        if kind == "hellinger":
            return (np.sqrt(t) - 1.0) ** 2
        if kind == "tv":
            return np.abs(t - 1.0)
    raise SchemaError(f"unknown divergence kind {kind!r}")


def phi_recession(kind: str) -> float:
    """lim_{t -> inf} phi(t) / t."""
    if kind not in DIVERGENCE_KINDS:
        raise SchemaError(f"unknown divergence kind {kind!r}")
    return {"kl": np.inf, "modified-chi2": np.inf, "burg": 0.0,
            "chi2": 1.0, "hellinger": 1.0, "tv": 1.0}[kind]


def phi_divergence(p, q, kind: str) -> float:
    """I_phi(p, q) = sum_j q_j phi(p_j / q_j).

    Terms with q_j = 0 contribute p_j * lim phi(t)/t (zero when p_j = 0).
    """
    p = np.asarray(p, dtype=float).ravel()
    q = np.asarray(q, dtype=float).ravel()
    if p.size != q.size:
        raise SchemaError("p and q must have the same length")
    if np.any(p < 0) or np.any(q < 0):
        raise SchemaError("p and q must be nonnegative")
    rec = phi_recession(kind)
    on = q > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        terms_on = q[on] * phi_function(kind, p[on] / q[on])
    off = (~on) & (p > 0)
    total = float(terms_on.sum())
    if off.any():
        total += float(p[off].sum() * rec) if np.isfinite(rec) else np.inf
    return total


def expectation_gap_bound(L: float, M: float, theta: float, p: float) -> float:
    """Upper bound L * theta**p + M on E_mu Psi - E_nu Psi over the ball.

    Valid when |Psi(x) - Psi(y)| <= L d(x, y)**p + M.
    """
    return L * theta ** p + M
