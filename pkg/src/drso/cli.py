"""Command-line front end: read instance files, run a solver, print JSON, CSV or a table.

Exit status: 0 success, 1 malformed input, 2 the solver reports an
infeasible or unbounded problem, 3 an oracle budget was exceeded. Errors are
also written to stderr as one JSON object.
"""
import argparse
import io as _io
import json
import math
import sys

import numpy as np

from . import io
from .applications.affine import affine_drso
from .applications.drtp import (ContinuumInstance, disc_grid, drtp_solve, square_grid,
                                transport_cost_lp)
from .applications.newsvendor import NewsvendorInstance, bin_demand, newsvendor_loss, newsvendor_solve
from .applications.uq import Disc, HalfSpace, uq_oracle, uq_solve
from .applications.var import VaRQuery, var_grid_scan, wc_var
from .dual import (VANISHING, DualUnboundedBelow, EpsilonTooSmall, NoWorstCase, WassersteinBall,
                   construct_worst_case, primal_oracle, solve_dual)
from .lp import LPBudgetExceeded, LPInfeasible, LPUnbounded, simplex_max
from .measures import (DiscreteDistribution, GroundMetric, PointSpace, SchemaError,
                       phi_divergence, wasserstein_distance)
from .objectives import Objective, table_objective
from .phi import (best_delta, calibrate_radius, log_concentration_bound, newsvendor_comparison,
                  phi_worst_case, sample_demand)
from .process import (ControlPolicy, evaluate_control, generate_paths, inner_lp_oracle,
                      optimize_control)

DEFAULT_SEED = 20170101
DEFAULT_TOLERANCE = 1e-8


class Output:
    """A result: scalar/structured fields for JSON plus an optional table for CSV."""

    def __init__(self, doc, header=None, rows=None):
        self.doc = doc
        self.header = header
        self.rows = rows

    def render(self, fmt):
        if fmt == "json":
            return io.dumps(self.doc) + "\n"
        buf = _io.StringIO()
        if fmt == "csv":
            if self.header is not None:
                buf.write(",".join(self.header) + "\n")
                for r in self.rows:
                    buf.write(",".join(_cell(x) for x in r) + "\n")
            else:
                buf.write("key,value\n")
                for k, v in _scalars(self.doc):
                    buf.write(f"{k},{_cell(v)}\n")
            return buf.getvalue()
        # table
        pairs = list(_scalars(self.doc))
        width = max((len(k) for k, _ in pairs), default=0)
        for k, v in pairs:
            buf.write(f"{k.ljust(width)}  {_cell(v)}\n")
        if self.header is not None:
            cells = [self.header] + [[_cell(x) for x in r] for r in self.rows]
            widths = [max(len(r[c]) for r in cells) for c in range(len(self.header))]
            buf.write("\n")
            for r in cells:
                buf.write("  ".join(x.rjust(w) for x, w in zip(r, widths)).rstrip() + "\n")
        return buf.getvalue()


def _cell(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return io.fmt(x)
    if x is None:
        return ""
    return str(x)


def _scalars(doc, prefix=""):
    for k, v in doc.items():
        if isinstance(v, dict):
            yield from _scalars(v, prefix + k + ".")
        elif isinstance(v, (list, np.ndarray)):
            continue
        else:
            yield prefix + k, v


def _oracle_section(value, oracle_value, tol):
    gap = abs(float(value) - float(oracle_value))
    return {"value": oracle_value, "gap": gap, "tolerance": tol, "ok": bool(gap <= tol)}


# ---------------------------------------------------------------------------
# random instances for quick checks
# ---------------------------------------------------------------------------

def random_instance(seed: int) -> dict:
    """A small random instance document (at most 5 nominal atoms and 20 candidates)."""
    rng = np.random.default_rng(seed)
    m = int(rng.integers(2, 21))
    n = int(rng.integers(1, min(5, m) + 1))
    kind = ["euclidean", "l1", "linf", "discrete", "explicit-matrix"][int(rng.integers(5))]
    p = float(rng.integers(1, 3))
    metric = {"kind": kind, "p": p}
    if kind == "explicit-matrix":
        W = rng.uniform(0.5, 3.0, (m, m))
        D = np.minimum(W, W.T)
        np.fill_diagonal(D, 0.0)
        for k in range(m):  # shortest-path closure gives a metric
            D = np.minimum(D, D[:, [k]] + D[[k], :])
        metric["matrix"] = D
        cands = np.arange(m, dtype=float)[:, None]
    else:
        dim = int(rng.integers(1, 4))
        cands = np.unique(rng.integers(-5, 6, (m, dim)).astype(float), axis=0)
        m = cands.shape[0]
        n = min(n, m)
    idx = rng.choice(m, size=n, replace=False)
    return {
        "schema": io.SCHEMA,
        "nominal": {"points": cands[idx], "weights": rng.dirichlet(np.ones(n))},
        "candidates": cands,
        "metric": metric,
        "theta": float(rng.uniform(0.05, 2.0)),
        "objective": {"table": rng.normal(size=m)},
    }


def _instance(args):
    if args.input is not None:
        doc = io.load_json(args.input)
    else:
        doc = random_instance(args.seed)
    return io.parse_instance(doc)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _load_distribution(path):
    if str(path).endswith(".json"):
        return io.parse_distribution(io.load_json(path), path)
    return io.read_distribution_csv(path)


def cmd_wasserstein(args):
    mu, nu = _load_distribution(args.a), _load_distribution(args.b)
    matrix = io.read_matrix_csv(args.cost) if args.cost else None
    metric = GroundMetric(args.metric, args.p, matrix)
    dist, plan = wasserstein_distance(mu, nu, metric)
    doc = {"schema": io.SCHEMA, "distance": dist, "cost": plan.cost,
           "plan": [{"from": int(r), "to": int(c), "mass": m}
                    for r, c, m in zip(plan.rows, plan.cols, plan.mass)]}
    if args.check_oracle:
        a, b = mu.weights, nu.weights
        C = metric.cost(mu.points, nu.points)
        n, m = C.shape
        A = np.zeros((n + m, n * m))
        for i in range(n):
            A[i, i * m:(i + 1) * m] = 1.0
        for j in range(m):
            A[n + j, j::m] = 1.0
        res = simplex_max(-C.ravel(), None, None, A, np.concatenate([a, b]))
        doc["oracle"] = _oracle_section(plan.cost, -res.value, args.tolerance)
    rows = [[int(r), int(c), m] for r, c, m in zip(plan.rows, plan.cols, plan.mass)]
    return Output(doc, ["from", "to", "mass"], rows)


def _dual_oracle(ball, obj, cands, sol, tol, max_vars):
    """Primal LP against the dual value.

    Without a worst case the LP over the finite candidates solves the
    truncated problem, so it is compared with the dual that ignores the
    declared growth rate; the truncation slack is reported separately.
    """
    lp = primal_oracle(ball, obj, cands, max_vars=max_vars).value
    if sol.existence != VANISHING:
        return _oracle_section(sol.v_dual, lp, tol)
    truncated = Objective(obj.func, kappa=None, lipschitz=obj.lipschitz, name=obj.name)
    out = _oracle_section(solve_dual(ball, truncated, cands).v_dual, lp, tol)
    out["compared_with"] = "dual of the candidate-truncated problem"
    out["truncation_slack"] = sol.v_dual - lp
    return out


def cmd_dual_solve(args):
    ball, obj, cands = _instance(args)
    sol = solve_dual(ball, obj, cands, method=args.method)
    doc = io.dual_doc(sol)
    if args.check_oracle:
        doc["oracle"] = _dual_oracle(ball, obj, cands, sol, args.tolerance, args.max_vars)
    return Output(doc)


def cmd_worst_case(args):
    ball, obj, cands = _instance(args)
    sol = solve_dual(ball, obj, cands)
    wc = construct_worst_case(ball, obj, cands, sol)
    doc = io.worst_case_doc(wc, ball)
    doc["existence"] = sol.existence
    doc["lambda_star"] = sol.lambda_star
    if args.check_oracle:
        doc["oracle"] = _oracle_section(
            wc.value, primal_oracle(ball, obj, cands, max_vars=args.max_vars).value, args.tolerance)
    pts, w = wc.distribution.points, wc.distribution.weights
    rows = [list(x) + [wi] for x, wi in zip(pts.tolist(), w)]
    header = [f"x{k}" for k in range(pts.shape[1])] + ["weight"]
    return Output(doc, header, rows)


def cmd_oracle(args):
    ball, obj, cands = _instance(args)
    res = primal_oracle(ball, obj, cands, max_vars=args.max_vars)
    doc = {"schema": io.SCHEMA, "value": res.value, "cost": res.cost, "budget": ball.budget,
           "distribution": io.distribution_doc(res.distribution)}
    if args.check_oracle:
        # the cross-check here is the dual solver (of the truncated problem if no worst case exists)
        sol = solve_dual(ball, obj, cands)
        if sol.existence == VANISHING:
            truncated = Objective(obj.func, kappa=None, lipschitz=obj.lipschitz, name=obj.name)
            sol = solve_dual(ball, truncated, cands)
        doc["oracle"] = _oracle_section(res.value, sol.v_dual, args.tolerance)
    return Output(doc)


def cmd_newsvendor(args):
    samples = io.read_column_csv(args.samples)
    inst = NewsvendorInstance(bin_demand(samples, args.support_max), args.h, args.b, args.theta,
                              args.p)
    res = newsvendor_solve(inst)
    weights = res.worst_case.distribution.dense_weights()
    doc = {"schema": io.SCHEMA, "x_star": res.x_star, "value": res.value,
           "lambda_star": res.dual.lambda_star, "existence": res.dual.existence,
           "q": inst.q, "worst_case": weights, "costs": res.values}
    if args.check_oracle:
        ball = inst.ball()
        loss = newsvendor_loss(float(res.x_star), inst.h, inst.b)
        doc["oracle"] = _oracle_section(res.value,
                                        primal_oracle(ball, loss, ball.nominal.space).value,
                                        args.tolerance)
    rows = [[j, inst.q[j], weights[j], res.values[j]] for j in range(inst.q.size)]
    return Output(doc, ["bin", "q", "worst_case", "cost_of_order"], rows)


def _region(doc):
    kind = doc.get("type")
    if kind == "disc":
        return Disc(doc["center"], doc["radius"], bool(doc.get("closed", False)),
                    float(doc.get("offset", 0.0)))
    if kind == "halfspace":
        return HalfSpace(doc["a"], doc["b"], bool(doc.get("closed", False)),
                         float(doc.get("offset", 0.0)))
    raise SchemaError(f"unknown region type {kind!r}")


def cmd_uq(args):
    doc_in = io.load_json(args.input)
    nominal = io.parse_distribution(doc_in.get("nominal"), "nominal")
    metric = io.parse_metric(doc_in.get("metric", {}))
    try:
        region = _region(doc_in.get("region", {}))
    except KeyError as exc:
        raise SchemaError(f"region is missing the field {exc.args[0]!r}") from None
    theta = float(doc_in.get("theta", -1))
    res = uq_solve(nominal, region, theta, metric)
    doc = {"schema": io.SCHEMA, "value": res.value, "nominal_mass": res.nominal_mass,
           "cost": res.cost, "budget": theta ** metric.p,
           "moves": [{"atom": i, "fraction": f, "exit": e} for i, f, e in res.moves],
           "distribution": io.distribution_doc(res.distribution)}
    if args.check_oracle:
        doc["oracle"] = _oracle_section(res.value, uq_oracle(nominal, region, theta, metric),
                                        args.tolerance)
    return Output(doc)


def cmd_var(args):
    d = io.load_json(args.input)
    keys = ("w", "alpha", "theta")
    for k in keys:
        if k not in d:
            raise SchemaError(f"var request is missing the field {k!r}")
    query = VaRQuery(w=d["w"], alpha=float(d["alpha"]), theta=float(d["theta"]),
                     p=float(d.get("p", 1.0)), mean=d.get("mean"), cov=d.get("cov"),
                     samples=d.get("samples"), weights=d.get("weights"),
                     metric=d.get("metric", "linf"), tie_rule=d.get("tie_rule", "exact"))
    res = wc_var(query)
    doc = {"schema": io.SCHEMA, "var_worst_case": res.var_wc, "var_nominal": res.var_nominal,
           "certificate": res.certificate, "target": res.target, "flagged": res.flagged}
    if args.check_oracle:
        step = 1e-6 * max(1.0, abs(res.var_wc - res.var_nominal))
        doc["oracle"] = _oracle_section(res.var_wc, var_grid_scan(query, step),
                                        max(args.tolerance, step))
    return Output(doc)


def cmd_affine(args):
    d = io.load_json(args.input)
    for k in ("A_hat", "b_hat", "theta", "q_star", "candidates"):
        if k not in d:
            raise SchemaError(f"affine request is missing the field {k!r}")
    q_star = math.inf if d["q_star"] in ("inf", math.inf) else float(d["q_star"])
    x, val = affine_drso(d["A_hat"], d["b_hat"], float(d["theta"]), q_star, d["candidates"])
    doc = {"schema": io.SCHEMA, "x_star": x, "value": val}
    if args.check_oracle:
        doc["oracle"] = _oracle_section(val, _affine_oracle(d, x, q_star), args.tolerance)
    return Output(doc)


def _affine_oracle(d, x, q_star):
    """Primal transport LP: move coefficient vectors along the steepest ascent ray."""
    A = np.atleast_2d(np.asarray(d["A_hat"], dtype=float))
    b = np.asarray(d["b_hat"], dtype=float).ravel()
    theta = float(d["theta"])
    kind = {2.0: "euclidean", 1.0: "linf", math.inf: "l1"}.get(q_star)
    if kind is None:
        raise SchemaError("affine oracle supports q_star in {1, 2, inf}")
    if not np.any(x):
        return float(np.mean(A @ x + b))
    if kind == "euclidean":
        u = x / np.linalg.norm(x)
    elif kind == "linf":
        u = np.sign(x)
    else:
        k = int(np.argmax(np.abs(x)))
        u = np.zeros_like(x)
        u[k] = np.sign(x[k])
    reach = theta * A.shape[0]
    cands = np.vstack([A, A + reach * u])
    metric = GroundMetric(kind, 1.0)
    ball = WassersteinBall(DiscreteDistribution.empirical(A), metric, theta)
    obj = table_objective(cands, cands @ x)
    space = PointSpace(cands, check_distinct=False)
    return primal_oracle(ball, obj, space).value + float(np.mean(b))


def _read_control(args):
    if args.control is None:
        raise SchemaError("give the control as lo,hi;lo,hi;...")
    iv = []
    for part in args.control.split(";"):
        part = part.strip()
        if not part:
            continue
        try:
            lo, hi = (float(v) for v in part.split(","))
        except ValueError:
            raise SchemaError(f"bad interval {part!r}") from None
        iv.append((lo, hi))
    return ControlPolicy(iv)


def cmd_process_eval(args):
    paths = io.read_paths(args.paths)
    control = _read_control(args)
    val, tr = evaluate_control(control, paths, args.theta, args.c)
    doc = {"schema": io.SCHEMA, "value": val, "removal_value": tr.removal_value,
           "spent": tr.spent, "budget": tr.budget, "length": control.length,
           "removals": [{"path": k, "arrival": j, "fraction": f, "distance": dd}
                        for k, j, f, dd in tr.removals]}
    if args.check_oracle:
        lp = inner_lp_oracle(control, paths, args.theta)
        doc["oracle"] = _oracle_section(tr.removal_value, lp, args.tolerance)
    return Output(doc)


def cmd_process_opt(args):
    paths = io.read_paths(args.paths)
    control, val = optimize_control(paths, args.theta, args.c)
    doc = {"schema": io.SCHEMA, "value": val, "length": control.length,
           "intervals": [list(iv) for iv in control.intervals]}
    if args.check_oracle:
        _, tr = evaluate_control(control, paths, args.theta, args.c)
        lp = inner_lp_oracle(control, paths, args.theta)
        doc["oracle"] = _oracle_section(tr.removal_value, lp, args.tolerance)
    return Output(doc, ["lo", "hi"], [list(iv) for iv in control.intervals])


def cmd_process_gen(args):
    paths = generate_paths(args.n_paths, args.rate, seed=args.seed)
    doc = {"schema": io.SCHEMA, "seed": args.seed, "paths": [p.arrivals for p in paths]}
    width = max((p.arrivals.size for p in paths), default=0)
    rows = [list(p.arrivals) + [None] * (width - p.arrivals.size) for p in paths]
    return Output(doc, [f"t{k}" for k in range(width)], rows)


def cmd_drtp(args):
    d = io.load_json(args.input)
    grid = d.get("grid", {"n": 50})
    n = int(grid.get("n", 50))
    if grid.get("shape", "square") == "disc":
        cells, areas = disc_grid(n, grid.get("center", (0.0, 0.0)), float(grid.get("radius", 1.0)))
    else:
        cells, areas = square_grid(n, grid.get("lo", (0.0, 0.0)), grid.get("hi", (1.0, 1.0)))
    nominal = io.parse_distribution(d.get("nominal"), "nominal")
    metric = io.parse_metric(d.get("metric", {}))
    inst = ContinuumInstance(cells, areas, nominal, metric, float(d.get("theta", 0.0)))
    res = drtp_solve(inst)
    doc = {"schema": io.SCHEMA, "value": res.value, "dual_value": res.dual_value,
           "lambda_star": res.lambda_star, "v_star": res.v_star, "mass": res.mass,
           "atom_masses": res.atom_masses, "transport_cost": res.transport_cost,
           "slack": res.slack, "gap": res.gap, "iterations": res.iterations}
    if args.check_oracle:
        lp_cost = transport_cost_lp(inst, res.f_star)
        doc["oracle"] = _oracle_section(res.transport_cost, lp_cost, max(args.tolerance, 1e-6))
    rows = [list(c) + [f] for c, f in zip(cells.tolist(), res.f_star)]
    return Output(doc, ["x", "y", "density"], rows)


def _samples(args):
    if args.samples:
        return io.read_column_csv(args.samples)
    return sample_demand(args.dist, args.n, args.support_max, seed=args.seed)


def cmd_phi_compare(args):
    x = _samples(args)
    comp = newsvendor_comparison(x, args.support_max, args.h, args.b, theta_w=args.theta_w,
                                 theta_phi=args.theta_phi)
    doc = {"schema": io.SCHEMA, "orders": comp.orders, "values": comp.values, "q": comp.q,
           "worst_case": comp.worst}
    if args.check_oracle:
        res = {}
        for kind in ("burg", "kl"):
            psi = np.maximum(args.h * (comp.orders[kind] - np.arange(comp.q.size)),
                             args.b * (np.arange(comp.q.size) - comp.orders[kind]))
            wc = phi_worst_case(comp.q, psi, args.theta_phi, kind)
            res[kind] = abs(phi_divergence(wc.p_star, comp.q, kind) - args.theta_phi) \
                if wc.lambda_star > 0 else 0.0
        doc["oracle"] = {"divergence_residual": res,
                         "ok": bool(max(res.values()) <= max(args.tolerance, 1e-8))}
    rows = [[j, comp.q[j], comp.worst["wasserstein"][j], comp.worst["burg"][j],
             comp.worst["kl"][j]] for j in range(comp.q.size)]
    return Output(doc, ["bin", "q", "p*_wasserstein", "p*_burg", "p*_kl"], rows)


def cmd_calibrate(args):
    x = _samples(args)
    cal = calibrate_radius(x, float(args.support_max), args.target)
    doc = {"schema": io.SCHEMA, "theta": cal.theta, "delta": cal.delta,
           "talagrand": cal.talagrand, "bound": cal.bound, "target": args.target,
           "n": int(x.size)}
    thetas = cal.theta * np.linspace(0.5, 2.0, 31)
    rows = []
    for th in thetas:
        lv, dl = best_delta(th, float(args.support_max), cal.talagrand, x.size)
        rows.append([th, dl, math.exp(lv)])
    if args.check_oracle:
        grid = cal.theta * np.linspace(1e-4, 1 - 1e-4, 20001)
        brute = min(log_concentration_bound(cal.theta, dl, float(args.support_max), cal.talagrand,
                                            x.size) for dl in grid)
        doc["oracle"] = _oracle_section(cal.bound, math.exp(brute), max(args.tolerance, 1e-6))
    return Output(doc, ["theta", "delta", "bound"], rows)


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("json", "csv", "table"), default="json")
    common.add_argument("--output", "-o", help="write here instead of stdout")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED)
    common.add_argument("--tolerance", type=float, default=DEFAULT_TOLERANCE,
                        help="agreement threshold for --check-oracle")
    common.add_argument("--check-oracle", action="store_true",
                        help="also run the brute-force path and report the gap")

    ap = argparse.ArgumentParser(prog="drso", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("wasserstein", parents=[common], help="distance and optimal plan")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--metric", default="euclidean")
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--cost", help="CSV distance matrix for the explicit-matrix metric")
    p.set_defaults(func=cmd_wasserstein)

    for name, func, hlp in (("dual-solve", cmd_dual_solve, "dual value and multiplier"),
                            ("worst-case", cmd_worst_case, "worst-case distribution"),
                            ("oracle", cmd_oracle, "primal LP over couplings")):
        p = sub.add_parser(name, parents=[common], help=hlp)
        p.add_argument("--input", "-i", help="instance JSON (omit for a random instance from --seed)")
        if name == "dual-solve":
            p.add_argument("--method", choices=("auto", "envelope", "golden"), default="auto")
        p.add_argument("--max-vars", type=int, default=40000, help="primal LP size limit")
        p.set_defaults(func=func)

    p = sub.add_parser("newsvendor", parents=[common], help="robust order quantity")
    p.add_argument("--samples", required=True, help="CSV column of demand samples")
    p.add_argument("--support-max", type=int, required=True)
    p.add_argument("--h", type=float, default=1.0)
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--p", type=float, default=1.0)
    p.set_defaults(func=cmd_newsvendor)

    for name, func in (("uq", cmd_uq), ("var", cmd_var), ("affine", cmd_affine),
                       ("drtp", cmd_drtp)):
        p = sub.add_parser(name, parents=[common])
        p.add_argument("--input", "-i", required=True)
        p.set_defaults(func=func)

    for name, func in (("process-eval", cmd_process_eval), ("process-opt", cmd_process_opt)):
        p = sub.add_parser(name, parents=[common])
        p.add_argument("--paths", required=True, help="CSV (one row per path) or JSON")
        p.add_argument("--theta", type=float, required=True)
        p.add_argument("--c", type=float, required=True)
        if name == "process-eval":
            p.add_argument("--control", help="intervals as lo,hi;lo,hi")
        p.set_defaults(func=func)

    p = sub.add_parser("process-gen", parents=[common], help="synthetic arrival paths")
    p.add_argument("--n-paths", type=int, default=10)
    p.add_argument("--rate", type=float, default=10.0)
    p.set_defaults(func=cmd_process_gen)

    for name, func in (("phi-compare", cmd_phi_compare), ("calibrate", cmd_calibrate)):
        p = sub.add_parser(name, parents=[common])
        p.add_argument("--samples", help="CSV column of samples (default: synthetic)")
        p.add_argument("--dist", choices=("binomial", "geometric"), default="binomial")
        p.add_argument("--n", type=int, default=50)
        p.add_argument("--support-max", type=int, default=100)
        if name == "phi-compare":
            p.add_argument("--h", type=float, default=1.0)
            p.add_argument("--b", type=float, default=1.0)
            p.add_argument("--theta-w", type=float, help="Wasserstein radius (default: calibrated)")
            p.add_argument("--theta-phi", type=float, default=0.1)
        else:
            p.add_argument("--target", type=float, default=0.05)
        p.set_defaults(func=func)
    return ap


EXIT_CODES = (
    (LPBudgetExceeded, 3),
    ((LPInfeasible, LPUnbounded, DualUnboundedBelow, NoWorstCase, EpsilonTooSmall), 2),
    (SchemaError, 1),
)


def _fail(exc, code):
    sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc),
                                 "exit_code": code}) + "\n")
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        out = args.func(args)
    except Exception as exc:  # map known failures to exit codes
        for kinds, code in EXIT_CODES:
            if isinstance(exc, kinds):
                return _fail(exc, code)
        if isinstance(exc, (ValueError, KeyError, TypeError)):
            return _fail(exc, 1)
        raise
    text = out.render(args.format)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        try:
            sys.stdout.write(text)
            sys.stdout.flush()
        except BrokenPipeError:  # reader closed early (e.g. piped into head)
            sys.stderr.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
