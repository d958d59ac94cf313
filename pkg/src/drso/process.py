"""Robust on/off control of a point process on [0, 1].

A control switches a reward collector on over a union of closed intervals,
paying c per unit of on-time and earning one unit per arrival it covers. The
adversary may shift arrival times within a Wasserstein budget: N theta in total
displacement across the N sample paths. The cheapest way to hurt the control
is to push covered arrivals just outside their interval, nearest arrivals
first, which is what the greedy evaluation does.
"""
import math
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from .lp import LPBudgetExceeded, simplex_max
from .measures import SchemaError


@dataclass
class SamplePath:
    arrivals: np.ndarray

    def __post_init__(self):
        a = np.sort(np.asarray(self.arrivals, dtype=float).ravel())
        if a.size and (a[0] < 0 or a[-1] > 1):
            raise SchemaError("arrival times must lie in [0, 1]")
        self.arrivals = a


@dataclass
class ControlPolicy:
    """Sorted, pairwise disjoint closed intervals within [0, 1]."""

    intervals: List[tuple] = field(default_factory=list)

    def __post_init__(self):
        iv = [(float(lo), float(hi)) for lo, hi in self.intervals]
        for lo, hi in iv:
            if not (0.0 <= lo <= hi <= 1.0):
                raise SchemaError(f"interval [{lo}, {hi}] is not inside [0, 1]")
        for (_, h1), (l2, _) in zip(iv, iv[1:]):
            if not l2 > h1:
                raise SchemaError("intervals must be sorted and disjoint")
        self.intervals = iv

    @property
    def length(self) -> float:
        return float(sum(hi - lo for lo, hi in self.intervals))

    def covers(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape, dtype=bool)
        for lo, hi in self.intervals:
            out |= (t >= lo) & (t <= hi)
        return out


@dataclass
class GreedyTransport:
    removals: List[tuple]  # (path, arrival index, fraction removed, displacement)
    spent: float
    budget: float
    removal_value: float


def _exit_distances(control: ControlPolicy, paths: Sequence[SamplePath]):
    """Covered arrivals with their cheapest exit displacement.

    An endpoint at 0 or 1 cannot be crossed since arrivals stay in [0, 1].
    """
    rows = []
    for k, path in enumerate(paths):
        for j, t in enumerate(path.arrivals):
            for lo, hi in control.intervals:
                if lo <= t <= hi:
                    left = t - lo if lo > 0 else math.inf
                    right = hi - t if hi < 1 else math.inf
                    rows.append((k, j, left, right))
                    break
    return rows


def evaluate_control(control: ControlPolicy, paths: Sequence[SamplePath], theta: float, c: float):
    """Worst-case value -c |x| + (1/N) sum covered arrivals - removed mass.

    Returns (value, GreedyTransport).
    """
    if theta < 0:
        raise SchemaError("theta must be nonnegative")
    N = len(paths)
    if N == 0:
        raise SchemaError("need at least one sample path")
    rows = _exit_distances(control, paths)
    budget = N * theta
    order = sorted(((min(l, r), k, j) for k, j, l, r in rows))
    spent, removed = 0.0, 0.0
    removals = []
    snap = 1e-12 * max(1.0, budget)
    for d, k, j in order:
        if not math.isfinite(d):
            break
        if spent + d <= budget + snap:
            frac = 1.0
        else:
            frac = (budget - spent) / d
            if frac <= 0:
                break
        spent += frac * d
        removed += frac
        removals.append((k, j, frac, d))
        if frac < 1.0:
            break
    covered = len(rows)
    value = -c * control.length + (covered - removed) / N
    return value, GreedyTransport(removals, min(spent, budget), budget, removed / N)


def inner_lp_oracle(control: ControlPolicy, paths: Sequence[SamplePath], theta: float,
                    max_decisions: int = 5000) -> float:
    """Removal value from the transport LP with separate left/right exits.

    maximize (1/N) sum_k (p_k^left + p_k^right)
    s.t. p_k^left + p_k^right <= 1, sum_k (p^left d^left + p^right d^right) <= N theta.
    """
    N = len(paths)
    rows = _exit_distances(control, paths)
    cols = []  # (arrival row, distance)
    for r, (_, _, l, rr) in enumerate(rows):
        for d in (l, rr):
            if math.isfinite(d):
                cols.append((r, d))
    if not cols:
        return 0.0
    if len(cols) > max_decisions:
        raise LPBudgetExceeded(f"{len(cols)} decisions exceed the oracle budget of {max_decisions}")
    nv = len(cols)
    A = np.zeros((len(rows) + 1, nv))
    for v, (r, d) in enumerate(cols):
        A[r, v] = 1.0
        A[-1, v] = d
    b = np.concatenate([np.ones(len(rows)), [N * theta]])
    res = simplex_max(np.full(nv, 1.0 / N), A_ub=A, b_ub=b)
    return res.value


# ---------------------------------------------------------------------------
# control optimization
# ---------------------------------------------------------------------------

@dataclass
class OptimizeOptions:
    offsets: int = 4  # candidate endpoints at data +- k theta for k < offsets
    window: int = 40  # endpoint moves considered on each side
    max_sweeps: int = 200
    cluster_gap: float = None  # default 1 / (c N)


def _fast_value(intervals, flat, budget, c, N):
    """Greedy worst-case value on a flat array of arrival times."""
    if not intervals:
        return 0.0
    los = np.array([lo for lo, _ in intervals])
    his = np.array([hi for _, hi in intervals])
    k = np.searchsorted(los, flat, side="right") - 1
    ok = k >= 0
    kk = np.where(ok, k, 0)
    inside = ok & (flat <= his[kk])
    t = flat[inside]
    lo, hi = los[kk[inside]], his[kk[inside]]
    left = np.where(lo > 0, t - lo, np.inf)
    right = np.where(hi < 1, hi - t, np.inf)
    d = np.sort(np.minimum(left, right))
    d = d[np.isfinite(d)]
    cum = np.cumsum(d)
    full = int(np.searchsorted(cum, budget * (1 + 1e-12), side="right"))
    removed = float(full)
    if full < d.size:
        rest = budget - (cum[full - 1] if full else 0.0)
        removed += max(rest, 0.0) / d[full] if d[full] > 0 else 1.0
    length = float(np.sum(his - los))
    return -c * length + (t.size - removed) / N


def _normalize(intervals):
    iv = sorted((lo, hi) for lo, hi in intervals if hi >= lo)
    out = []
    for lo, hi in iv:
        if out and lo <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], hi))
        else:
            out.append((lo, hi))
    return out


def _starts(flat, c, N, theta, gap, cands):
    """Initial controls: empty, clusters of nearby arrivals, and a histogram threshold."""
    starts = [[]]
    if flat.size:
        srt = np.sort(flat)
        groups = np.split(srt, np.nonzero(np.diff(srt) > gap)[0] + 1)
        iv = [(max(0.0, g[0] - theta), min(1.0, g[-1] + theta)) for g in groups]
        starts.append(_normalize(iv))
        for width in (0.05, 0.1):
            edges = np.arange(0.0, 1.0 + width / 2, width)
            counts, _ = np.histogram(flat, bins=edges)
            on = counts / (N * width) > c
            iv = [(edges[i], edges[i + 1]) for i in np.nonzero(on)[0]]
            starts.append(_normalize(iv))
    snapped = []
    for s in starts:
        snapped.append(_normalize([(cands[np.argmin(np.abs(cands - lo))],
                                    cands[np.argmin(np.abs(cands - hi))]) for lo, hi in s]))
    return snapped


def optimize_control(paths: Sequence[SamplePath], theta: float, c: float,
                     options: OptimizeOptions = None):
    """Local search for a control with high worst-case value.

    Endpoints live on a candidate grid (arrival times shifted by multiples of
    theta, midpoints between consecutive arrivals, 0 and 1). From several
    starts, the best single move (endpoint shift, merge of neighbours, drop of
    an interval) is applied until none improves; ties go to the lowest move id.
    Intervals covering no arrival are pruned. Returns (control, value).
    """
    opts = options or OptimizeOptions()
    N = len(paths)
    flat = np.concatenate([p.arrivals for p in paths]) if N else np.zeros(0)
    budget = N * theta
    gap = opts.cluster_gap if opts.cluster_gap is not None else 1.0 / (max(c, 1e-12) * N)
    srt = np.unique(flat)
    pieces = [srt + k * theta for k in range(-opts.offsets + 1, opts.offsets)]
    pieces += [0.5 * (srt[1:] + srt[:-1]), np.array([0.0, 1.0])]
    cands = np.unique(np.clip(np.concatenate(pieces), 0.0, 1.0))
    best_iv, best_val = [], 0.0
    for start in _starts(flat, c, N, theta, gap, cands):
        iv = start
        val = _fast_value(iv, flat, budget, c, N)
        for _ in range(opts.max_sweeps):
            moves = []
            for k, (lo, hi) in enumerate(iv):
                prev_hi = iv[k - 1][1] if k > 0 else -1.0
                next_lo = iv[k + 1][0] if k + 1 < len(iv) else 2.0
                il = int(np.searchsorted(cands, lo))
                ih = int(np.searchsorted(cands, hi))
                for j in range(max(0, il - opts.window), min(cands.size, il + opts.window + 1)):
                    nl = cands[j]
                    if prev_hi < nl <= hi and nl != lo:
                        moves.append(iv[:k] + [(nl, hi)] + iv[k + 1:])
                for j in range(max(0, ih - opts.window), min(cands.size, ih + opts.window + 1)):
                    nh = cands[j]
                    if lo <= nh < next_lo and nh != hi:
                        moves.append(iv[:k] + [(lo, nh)] + iv[k + 1:])
                if k + 1 < len(iv):
                    moves.append(iv[:k] + [(lo, iv[k + 1][1])] + iv[k + 2:])
                moves.append(iv[:k] + iv[k + 1:])
            if not moves:
                break
            vals = np.array([_fast_value(m, flat, budget, c, N) for m in moves])
            j = int(np.argmax(vals))
            if vals[j] <= val + 1e-12:
                break
            iv, val = moves[j], float(vals[j])
        iv = [(lo, hi) for lo, hi in iv if np.any((flat >= lo) & (flat <= hi))]
        val = _fast_value(iv, flat, budget, c, N)
        if val > best_val + 1e-12:
            best_iv, best_val = iv, val
    control = ControlPolicy(best_iv)
    value, _ = evaluate_control(control, paths, theta, c)
    return control, value


# ---------------------------------------------------------------------------
# synthetic data
# ---------------------------------------------------------------------------

@dataclass
class SinusoidIntensity:
    """Arrival density f(t) = k (a + sin(w t + s)) on [0, 1], normalized."""

    a: float = 1.1
    w: float = 5 * math.pi
    s: float = 2.5 * math.pi

    @property
    def k(self) -> float:
        return 1.0 / (self.a + (math.cos(self.s) - math.cos(self.w + self.s)) / self.w)

    def density(self, t):
        return self.k * (self.a + np.sin(self.w * np.asarray(t) + self.s))


def generate_paths(n_paths: int, rate: float, intensity: SinusoidIntensity = None,
                   seed: int = 0) -> List[SamplePath]:
    """Poisson(rate) arrivals per path, i.i.d. times drawn from the density by rejection."""
    intensity = intensity or SinusoidIntensity()
    rng = np.random.default_rng(seed)
    fmax = intensity.k * (intensity.a + 1.0)
    paths = []
    for _ in range(n_paths):
        m = int(rng.poisson(rate))
        out = np.zeros(0)
        while out.size < m:
            t = rng.random(2 * (m - out.size) + 8)
            u = rng.random(t.size) * fmax
            out = np.concatenate([out, t[u <= intensity.density(t)]])
        paths.append(SamplePath(out[:m]))
    return paths


def true_on_region(rate: float, c: float, intensity: SinusoidIntensity = None,
                   resolution: int = 200_001) -> ControlPolicy:
    """Intervals where the expected reward rate exceeds the running cost."""
    intensity = intensity or SinusoidIntensity()
    t = np.linspace(0.0, 1.0, resolution)
    on = rate * intensity.density(t) > c
    iv = []
    i = 0
    while i < t.size:
        if on[i]:
            j = i
            while j + 1 < t.size and on[j + 1]:
                j += 1
            iv.append((t[i], t[j]))
            i = j + 1
        else:
            i += 1
    return ControlPolicy(iv)


def jaccard(a: ControlPolicy, b: ControlPolicy) -> float:
    """|A intersect B| / |A union B| for unions of intervals."""
    inter = 0.0
    for l1, h1 in a.intervals:
        for l2, h2 in b.intervals:
            inter += max(0.0, min(h1, h2) - max(l1, l2))
    union = a.length + b.length - inter
    return inter / union if union > 0 else 1.0
