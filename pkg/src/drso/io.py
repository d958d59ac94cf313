"""Reading and writing instance files (schema "drso/1")."""
import csv
import json
import math

import numpy as np

from .dual import DualSolution, WassersteinBall, WorstCaseDistribution
from .measures import DiscreteDistribution, GroundMetric, PointSpace, SchemaError
from .objectives import named_objective, table_objective
from .process import SamplePath

SCHEMA = "drso/1"


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def _plain(obj):
    """Convert numpy containers and scalars to plain Python values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def _write(obj, indent, level, out):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for k, (key, val) in enumerate(obj.items()):
            out.append(pad + json.dumps(key) + ": ")
            _write(val, indent, level + 1, out)
            out.append(",\n" if k + 1 < len(obj) else "\n")
        out.append(end + "}")
    elif isinstance(obj, list):
        if not obj or all(not isinstance(v, (dict, list)) for v in obj):
            # flat lists stay on one line
            out.append("[")
            for k, v in enumerate(obj):
                if k:
                    out.append(", ")
                _write(v, indent, level + 1, out)
            out.append("]")
            return
        out.append("[\n")
        for k, v in enumerate(obj):
            out.append(pad)
            _write(v, indent, level + 1, out)
            out.append(",\n" if k + 1 < len(obj) else "\n")
        out.append(end + "]")
    elif isinstance(obj, bool) or obj is None:
        out.append(json.dumps(obj))
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        # non-finite values are not valid JSON numbers and go out as strings
        if not math.isfinite(obj):
            out.append(json.dumps(str(obj)))
        else:
            txt = fmt(obj)
            out.append(txt if any(ch in txt for ch in ".e") else txt + ".0")
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent=2) -> str:
    """JSON text with every float written to 17 significant digits."""
    out = []
    _write(_plain(obj), indent, 0, out)
    return "".join(out)


def fmt(x) -> str:
    """One number with 17 significant digits."""
    return format(float(x), ".17g")


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def _require(doc, key, where="instance"):
    if key not in doc:
        raise SchemaError(f"{where} is missing the field {key!r}")
    return doc[key]


def load_json(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise SchemaError("top level of an instance file must be an object")
    schema = doc.get("schema", SCHEMA)
    if schema != SCHEMA:
        raise SchemaError(f"unsupported schema {schema!r}; expected {SCHEMA!r}")
    return doc


def parse_points(raw, where="points") -> np.ndarray:
    if isinstance(raw, dict) and "grid" in raw:
        g = raw["grid"]
        try:
            return PointSpace.grid_1d(float(g["lo"]), float(g["hi"]), float(g["step"])).points
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad grid in {where}: {exc}") from None
    try:
        pts = np.asarray(raw, dtype=float)
    except (TypeError, ValueError):
        raise SchemaError(f"{where} must be a list of numbers or coordinate lists") from None
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise SchemaError(f"{where} must be a non-empty list of points")
    return pts


def parse_distribution(doc, where="distribution") -> DiscreteDistribution:
    if not isinstance(doc, dict):
        raise SchemaError(f"{where} must be an object with points and weights")
    pts = parse_points(_require(doc, "points", where), where)
    w = doc.get("weights")
    if w is None:
        w = np.full(pts.shape[0], 1.0 / pts.shape[0])
    w = np.asarray(w, dtype=float).ravel()
    if w.size != pts.shape[0]:
        raise SchemaError(f"{where}: {w.size} weights for {pts.shape[0]} points")
    return DiscreteDistribution.from_points(pts, w)


def parse_metric(doc, p=None) -> GroundMetric:
    if not isinstance(doc, dict):
        raise SchemaError("metric must be an object with a kind")
    kind = doc.get("kind", "euclidean")
    order = float(doc.get("p", 1.0 if p is None else p))
    matrix = doc.get("matrix")
    if matrix is not None:
        matrix = np.asarray(matrix, dtype=float)
    return GroundMetric(kind, order, matrix, bool(doc.get("allow_asymmetric", False)))


def parse_objective(doc, candidates: np.ndarray):
    if not isinstance(doc, dict):
        raise SchemaError("objective must be an object")
    kappa = doc.get("kappa")
    lip = doc.get("lipschitz")
    if "table" in doc:
        return table_objective(candidates, doc["table"], kappa=kappa,
                               lipschitz=tuple(lip) if lip is not None else None)
    if "name" in doc:
        return named_objective(doc)
    raise SchemaError("objective needs either a table or a name")


def parse_instance(doc):
    """(ball, objective, candidates) from a decoded instance document."""
    nominal = parse_distribution(_require(doc, "nominal"), "nominal")
    cands = PointSpace(parse_points(_require(doc, "candidates"), "candidates"), check_distinct=False)
    metric = parse_metric(doc.get("metric", {}), doc.get("p"))
    try:
        theta = float(_require(doc, "theta"))
    except (TypeError, ValueError):
        raise SchemaError("theta must be a number") from None
    obj = parse_objective(_require(doc, "objective"), cands.points)
    return WassersteinBall(nominal, metric, theta), obj, cands


def read_distribution_csv(path) -> DiscreteDistribution:
    """Rows of point coordinates followed by the weight in the last column."""
    rows = _read_numeric_csv(path)
    if any(len(r) < 2 for r in rows):
        raise SchemaError("distribution CSV rows need coordinates and a weight")
    if len({len(r) for r in rows}) != 1:
        raise SchemaError("distribution CSV rows must have equal length")
    arr = np.array(rows)
    return DiscreteDistribution.from_points(arr[:, :-1], arr[:, -1])


def read_matrix_csv(path) -> np.ndarray:
    rows = _read_numeric_csv(path)
    if len({len(r) for r in rows}) != 1:
        raise SchemaError("matrix CSV rows must have equal length")
    return np.array(rows)


def read_column_csv(path) -> np.ndarray:
    """All numbers in a file, row by row (a single column of samples)."""
    return np.array([x for r in _read_numeric_csv(path) for x in r])


def read_paths(path):
    """Sample paths from CSV (one row of arrival times per path) or JSON."""
    if str(path).endswith(".json"):
        doc = load_json(path)
        raw = _require(doc, "paths")
        return [SamplePath(np.asarray(r, dtype=float)) for r in raw]
    rows = _read_numeric_csv(path, allow_empty_rows=True)
    return [SamplePath(np.asarray(r, dtype=float)) for r in rows]


def _read_numeric_csv(path, allow_empty_rows=False):
    try:
        with open(path, newline="") as fh:
            raw = list(csv.reader(fh))
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from None
    rows = []
    for k, r in enumerate(raw):
        cells = [c.strip() for c in r if c.strip() != ""]
        if not cells:
            if allow_empty_rows:
                rows.append([])
            continue
        if cells[0].startswith("#"):
            continue
        try:
            rows.append([float(c) for c in cells])
        except ValueError:
            if k == 0:
                continue  # header
            raise SchemaError(f"{path}: non-numeric value in row {k + 1}") from None
    if not rows:
        raise SchemaError(f"{path} contains no data")
    return rows


# ---------------------------------------------------------------------------
# result documents
# ---------------------------------------------------------------------------

def distribution_doc(dist: DiscreteDistribution) -> dict:
    return {"points": dist.points, "weights": dist.weights}


def dual_doc(sol: DualSolution) -> dict:
    return {
        "schema": SCHEMA,
        "lambda_star": sol.lambda_star,
        "value": sol.v_dual,
        "kappa_hat": sol.kappa_hat,
        "existence": sol.existence,
        "left_slope": sol.left_slope,
        "right_slope": sol.right_slope,
        "theta": sol.theta,
        "p": sol.p,
        "method": sol.method,
        "atoms": [{"zeta": a.zeta, "phi": a.phi, "near": a.near, "far": a.far,
                   "d_min": a.d_min, "d_max": a.d_max} for a in sol.atoms],
    }


def worst_case_doc(wc: WorstCaseDistribution, ball: WassersteinBall) -> dict:
    n = len(ball.nominal)
    return {
        "schema": SCHEMA,
        "value": wc.value,
        "cost": wc.cost,
        "budget": ball.budget,
        "distribution": distribution_doc(wc.distribution),
        "provenance": [{"source": s, "candidate": j, "fraction": f} for s, j, f in wc.provenance],
        "certificate": {
            "n_atoms": wc.n_atoms,
            "max_atoms": n + 1,
            "n_splits": wc.n_splits,
            "split_index": wc.split_index,
            "cost_within_budget": bool(wc.cost <= ball.budget * (1 + 1e-12) + 1e-12),
        },
    }
