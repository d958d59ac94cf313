"""Objective functions Psi together with their declared growth data."""
import math
from typing import Callable, Optional, Union

import numpy as np

from .measures import SchemaError

UNBOUNDED = "unbounded"


class Objective:
    """A deterministic real function Psi on points.

    kappa is the declared growth rate limsup (Psi(x) - Psi(z0)) / d(x, z0)**p
    (a float, or "unbounded"); None means no declaration, in which case a
    finite candidate set is treated as bounded and the growth rate as zero.
    lipschitz = (L, M) declares |Psi(x) - Psi(y)| <= L d(x, y) + M.
    """

    def __init__(self, func: Callable[[np.ndarray], np.ndarray],
                 kappa: Optional[Union[float, str]] = None,
                 lipschitz: Optional[tuple] = None, name: str = "custom"):
        if isinstance(kappa, str) and kappa != UNBOUNDED:
            raise SchemaError(f"kappa must be a number or {UNBOUNDED!r}")
        if isinstance(kappa, (int, float)) and math.isinf(kappa) and kappa > 0:
            kappa = UNBOUNDED
        self.func = func
        self.kappa = kappa
        self.lipschitz = lipschitz
        self.name = name

    @property
    def unbounded(self) -> bool:
        return self.kappa == UNBOUNDED

    def values(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        out = np.asarray(self.func(pts), dtype=float).ravel()
        if out.size != pts.shape[0]:
            raise SchemaError("objective returned the wrong number of values")
        if not np.all(np.isfinite(out)):
            raise SchemaError("objective returned non-finite values")
        return out

    def __call__(self, points) -> np.ndarray:
        return self.values(points)

    def check_lipschitz(self, points, metric, n_pairs: int = 200, seed: int = 0) -> bool:
        """Spot-check the declared (L, M) condition on random pairs."""
        if self.lipschitz is None:
            raise SchemaError("no Lipschitz data declared")
        L, M = self.lipschitz
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        rng = np.random.default_rng(seed)
        i = rng.integers(0, pts.shape[0], n_pairs)
        j = rng.integers(0, pts.shape[0], n_pairs)
        v = self.values(pts)
        d = metric.pairwise(pts, pts)[i, j]
        return bool(np.all(np.abs(v[i] - v[j]) <= L * d + M + 1e-12))


def table_objective(points, values, kappa=None, lipschitz=None) -> Objective:
    """Objective given by a lookup table on a finite set of points."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    vals = np.asarray(values, dtype=float).ravel()
    if vals.size != pts.shape[0]:
        raise SchemaError("table needs one value per candidate point")
    lookup = {tuple(row): v for row, v in zip(pts.tolist(), vals.tolist())}

    def func(x):
        try:
            return np.array([lookup[tuple(row)] for row in x.tolist()])
        except KeyError as exc:
            raise SchemaError(f"table objective has no value at point {list(exc.args[0])}") from None

    return Objective(func, kappa=kappa, lipschitz=lipschitz, name="table")


def hinge_shift(a: float) -> Objective:
    """Psi(x) = max(0, x - a) on [0, inf); growth rate one for p = 1."""
    return Objective(lambda x: np.maximum(0.0, x[:, 0] - a), kappa=1.0,
                     lipschitz=(1.0, 0.0), name="hinge")


def bump() -> Objective:
    """Psi(x) = max(1 - x**2, 0); bounded, so growth rate zero."""
    return Objective(lambda x: np.maximum(1.0 - x[:, 0] ** 2, 0.0), kappa=0.0,
                     lipschitz=(0.0, 1.0), name="bump")


def linear_plus_reciprocal(sign: int) -> Objective:
    """Psi(x) = 1 + x + sign / (x + 1) on [0, inf); growth rate one."""
    s = 1.0 if sign > 0 else -1.0
    name = "linear_plus_reciprocal" if s > 0 else "linear_minus_reciprocal"
    return Objective(lambda x: 1.0 + x[:, 0] + s / (x[:, 0] + 1.0), kappa=1.0,
                     lipschitz=(2.0, 0.0), name=name)


def named_objective(doc: dict) -> Objective:
    """Resolve the objective section of an instance file."""
    name = doc.get("name")
    if name == "hinge":
        return hinge_shift(float(doc.get("a", 0.0)))
    if name == "bump":
        return bump()
    if name == "linear_plus_reciprocal":
        return linear_plus_reciprocal(+1)
    if name == "linear_minus_reciprocal":
        return linear_plus_reciprocal(-1)
    raise SchemaError(f"unknown objective {name!r}")
