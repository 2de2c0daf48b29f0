"""Command-line entry point: ``infoqueue <command> [flags]``.

Parameters are resolved as built-in defaults, then ``--params``/``--belief``
files, then inline flags (later wins). Output goes to stdout or ``--out``
as CSV or JSON. Exit codes: 0 ok, 2 invalid input, 3 numerical failure,
4 I/O error; failures are reported on stderr as a JSON object.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from decimal import ROUND_HALF_EVEN, Decimal

import numpy as np

from . import reproduce as repro
from .analytics import MetricsRow, metrics_row
from .decision import advise, region_map
from .equilibrium import check_orderings, ordering_string, solve_classical, solve_private, solve_shared
from .errors import (InfoQueueError, NoCrossing, NonUnimodal, NotMM1, UnstableEffective,
                     UnstableRegime, ValidationError)
from .model import DiscreteBelief, SystemParams, UniformBelief, load_belief, point_mass, validate
from .sim import SimConfig, run, validate_against_analytics

DEFAULT_PARAMS = {"R": 5.0, "C": 5.0, "mu": 5.0, "lambda": 4.2}
DEFAULT_BELIEF = (3.6, 4.0)

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
NUMERIC_ERRORS = (NonUnimodal, NoCrossing, UnstableRegime, UnstableEffective, NotMM1)


def round_half_even(x, digits):
    if isinstance(x, bool) or not isinstance(x, (float, np.floating)):
        return x
    if not np.isfinite(x):
        return float(x)
    q = Decimal(1).scaleb(-digits)
    return float(Decimal(repr(float(x))).quantize(q, rounding=ROUND_HALF_EVEN))


def rounded(obj, digits):
    if digits is None:
        return obj
    if isinstance(obj, dict):
        return {k: rounded(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [rounded(v, digits) for v in obj]
    return round_half_even(obj, digits)


def _plain(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


# --------------------------------------------------------------------------
# Inputs


def resolve_params(args) -> SystemParams:
    d = dict(DEFAULT_PARAMS)
    if args.params:
        with open(args.params) as fh:
            d.update(json.load(fh))
    for key, flag in (("R", "R"), ("C", "C"), ("mu", "mu"), ("lambda", "lam"), ("s2", "s2")):
        v = getattr(args, flag, None)
        if v is not None:
            d[key] = v
    return SystemParams.from_dict(d)


def _parse_points(text):
    pts = []
    for chunk in text.split(","):
        v, _, w = chunk.partition(":")
        pts.append((float(v), float(w)))
    return pts


def resolve_belief(args):
    if args.belief_uniform is not None:
        a, b = args.belief_uniform
        return point_mass(a) if a == b else UniformBelief(a, b)
    if args.belief_point is not None:
        return point_mass(args.belief_point)
    if args.belief_discrete is not None:
        return DiscreteBelief(_parse_points(args.belief_discrete))
    if args.belief:
        return load_belief(args.belief)
    return UniformBelief(*DEFAULT_BELIEF)


def inputs(args):
    params = resolve_params(args)
    belief = resolve_belief(args)
    report = validate(params, belief)
    if not report.ok:
        raise ValidationError("; ".join(i.message for i in report.errors))
    # warnings go to stderr so stdout stays a clean serialisation
    for issue in report.warnings:
        print(f"warning: {issue.code}: {issue.message}", file=sys.stderr)
    return params, belief, report


# --------------------------------------------------------------------------
# Output


def emit(args, columns, rows, payload):
    """Write ``rows`` under ``columns`` as CSV, or ``payload`` as JSON."""
    digits = args.precision
    if args.format == "json":
        text = json.dumps(rounded(payload, digits), indent=2, default=_plain) + "\n"
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow(["" if v is None else rounded(v, digits) for v in r])
        text = buf.getvalue()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _row_values(row: MetricsRow):
    d = row.to_dict()
    return [d[c] for c in MetricsRow.columns()]


# --------------------------------------------------------------------------
# Commands


def cmd_analyze(args):
    params, belief, _ = inputs(args)
    row = metrics_row(params, belief, args.p)
    emit(args, MetricsRow.columns(), [_row_values(row)], row.to_dict())


def sweep_values(args):
    if args.steps <= 0:
        return []
    return list(np.linspace(args.start, args.stop, args.steps))


def cmd_sweep(args):
    params, belief, _ = inputs(args)
    values = sweep_values(args)
    if args.axis == "p":
        bad = [v for v in values if not 0.0 <= v <= params.max_fee]
        if bad:
            raise ValidationError(f"fee {bad[0]} outside [0, R - C/mu = {params.max_fee}]")
        jobs = [(params, belief, v) for v in values]
    elif args.axis == "belief-mean":
        jobs = [(params, belief.with_mean(v), args.p) for v in values]
    else:
        if any(v < 0 for v in values):
            raise ValidationError("belief half-range must be non-negative")
        jobs = [(params, belief.with_half_range(v), args.p) for v in values]
    for _, b, _ in jobs:
        rep = validate(params, b)
        if not rep.ok:
            raise ValidationError("; ".join(i.message for i in rep.errors))
    with ThreadPoolExecutor(max_workers=args.workers) as pool:
        rows = list(pool.map(lambda job: metrics_row(*job), jobs))
    lead = [] if args.axis == "p" else [args.axis]
    columns = lead + MetricsRow.columns()
    table = [([float(v)] if lead else []) + _row_values(r) for v, r in zip(values, rows)]
    emit(args, columns, table,
         {"axis": args.axis, "values": [float(v) for v in values],
          "rows": [r.to_dict() for r in rows]})


def cmd_equilibria(args):
    params, belief, _ = inputs(args)
    cl = solve_classical(params)
    sh = solve_shared(params, belief)
    private = {}
    for regime in ("individual", "rm", "so"):
        try:
            private[regime] = solve_private(params, belief, regime).to_dict()
        except NonUnimodal as exc:
            private[regime] = {"error": exc.code, "message": str(exc),
                               "candidates": [list(c) for c in exc.candidates]}
    payload = {"classical": cl.to_dict(), "shared": sh.to_dict(), "private": private,
               "ordering": ordering_string(cl, sh)}
    if params.is_mm1:
        payload["checks"] = check_orderings(params, belief).to_dict()["checks"]
    cols = ["case", "q_e", "q_m", "q_s", "p_e", "p_m", "p_s"]
    rows = [[e.case.value, e.q_e, e.q_m, e.q_s, e.p_e, e.p_m, e.p_s] for e in (cl, sh)]
    emit(args, cols, rows, payload)


def cmd_threshold_map(args):
    params, belief, _ = inputs(args)
    m = region_map(params, belief, args.xi_range, args.lambda_range, args.steps)
    rows = [[c.xi, c.lam, c.pvc, c.svc, c.pvs] for c in m.cells]
    emit(args, REGION_COLUMNS, rows, m.to_dict())
    if args.curves:
        write_curves(m, args.curves, args.precision)


REGION_COLUMNS = ["xi", "lambda", "pvc", "svc", "pvs"]


def write_curves(m, path, digits=None):
    """Threshold polylines as long-format CSV: curve, xi, lambda."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["curve", "xi", "lambda"])
        for name, pts in (("M", m.m_curve), ("xi0", m.xi0_line), ("shared_vs_classical", m.svc_curve)):
            for x, lam in pts:
                w.writerow([name, rounded(x, digits), rounded(lam, digits)])


def cmd_advise(args):
    params, belief, _ = inputs(args)
    a = advise(params, belief, args.audience)
    emit(args, ["audience", "regime", "action", "fee", "rationale"],
         [[a.audience, a.regime, a.action, a.fee, a.rationale]], a.to_dict())


def cmd_simulate(args):
    params, belief, _ = inputs(args)
    if args.service_dist == "deterministic" and args.s2 is None:
        params = params.replace(s2=1.0 / params.mu**2)
    config = SimConfig(params, belief, args.case, args.p, horizon=args.horizon,
                       warmup=args.warmup, seed=args.seed, service_dist=args.service_dist,
                       n_batches=args.batches)
    if args.validate:
        summary = validate_against_analytics(config)
        rows = [[c.name, c.simulated, c.half_width, c.analytic, c.passed] for c in summary.checks]
        emit(args, ["metric", "simulated", "half_width", "analytic", "passed"], rows,
             summary.to_dict())
        return
    r = run(config, trace=args.trace)
    cols = ["metric", "mean", "half_width"]
    rows = [["n_arrivals", r.n_arrivals, 0], ["n_joined", r.n_joined, 0]]
    for name in ("join_fraction", "mean_wait", "revenue_rate", "welfare_rate_physical"):
        est = getattr(r, name)
        rows.append([name, est.mean if est else None, est.half_width if est else None])
    emit(args, cols, rows, r.to_dict())


def cmd_reproduce(args):
    table = repro.TARGETS[args.target]()
    emit(args, table.columns, table.rows, table.to_dict())


# --------------------------------------------------------------------------
# Parser


def _add_io(p, precision=None):
    p.add_argument("--out", help="write to this path instead of stdout")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--precision", type=int, default=precision,
                   help="round floats half-even to N decimals"
                        + (f" (default {precision})" if precision is not None else " (default: full)"))


def _add_model(p):
    g = p.add_argument_group("model inputs (flags > files > defaults R=C=mu=5, lambda=4.2, U(3.6,4.0))")
    g.add_argument("--params", help="JSON file with R, C, mu, lambda and optional s2")
    g.add_argument("--belief", help="JSON belief file (uniform, discrete or tabulated)")
    g.add_argument("--R", type=float)
    g.add_argument("--C", type=float)
    g.add_argument("--mu", type=float)
    g.add_argument("--lambda", dest="lam", type=float)
    g.add_argument("--s2", type=float, help="second moment of service time (default 2/mu^2)")
    g.add_argument("--belief-uniform", type=float, nargs=2, metavar=("A", "B"))
    g.add_argument("--belief-point", type=float, metavar="X")
    g.add_argument("--belief-discrete", metavar="V:W,...")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="infoqueue",
        description="Revenue, welfare and disclosure analysis for an unobservable queue "
                    "whose customers hold beliefs about the arrival rate.",
        epilog="Input precedence: inline flags override --params/--belief files, which override "
               "the defaults.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="all per-fee metrics for one fee")
    _add_model(p)
    p.add_argument("--p", type=float, default=1.5)
    _add_io(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sweep", help="metrics along a fee or belief axis")
    _add_model(p)
    p.add_argument("--axis", choices=("p", "belief-mean", "belief-spread"), default="p")
    p.add_argument("--start", type=float, required=True)
    p.add_argument("--stop", type=float, required=True)
    p.add_argument("--steps", type=int, default=10)
    p.add_argument("--p", type=float, default=1.5, help="fee for belief axes")
    p.add_argument("--workers", type=int, default=None)
    _add_io(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("equilibria", help="joining probabilities for customers, RM and SO")
    _add_model(p)
    _add_io(p)
    p.set_defaults(func=cmd_equilibria)

    p = sub.add_parser("threshold-map", help="dominant case over a (xi, lambda) grid")
    _add_model(p)
    p.add_argument("--steps", type=int, default=25)
    p.add_argument("--xi-range", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--lambda-range", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--curves", help="CSV path for the threshold polylines")
    _add_io(p)
    p.set_defaults(func=cmd_threshold_map)

    p = sub.add_parser("advise", help="disclosure recommendation")
    _add_model(p)
    p.add_argument("--audience", choices=("rm", "so"), default="rm")
    _add_io(p)
    p.set_defaults(func=cmd_advise)

    p = sub.add_parser("simulate", help="discrete-event simulation")
    _add_model(p)
    p.add_argument("--case", choices=("classical", "shared", "private"), default="private")
    p.add_argument("--p", type=float, default=1.5)
    p.add_argument("--horizon", type=float, default=1e5)
    p.add_argument("--warmup", type=float, default=100.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--service-dist", choices=("exponential", "deterministic", "lognormal"),
                   default="exponential")
    p.add_argument("--batches", type=int, default=20)
    p.add_argument("--trace", help="CSV path for the per-arrival event trace")
    p.add_argument("--validate", action="store_true",
                   help="compare against closed-form values (3 half-widths)")
    _add_io(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reproduce", help="regenerate a reference table or plot dataset")
    p.add_argument("target", choices=sorted(repro.TARGETS))
    _add_io(p, precision=3)
    p.set_defaults(func=cmd_reproduce)
    return parser


def _fail(code, exc):
    sys.stderr.write(json.dumps({"error": getattr(exc, "code", type(exc).__name__),
                                 "message": str(exc), "exit_code": code}) + "\n")
    return code


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except NUMERIC_ERRORS as exc:
        return _fail(EXIT_NUMERIC, exc)
    except (ValidationError, ValueError, KeyError, json.JSONDecodeError) as exc:
        return _fail(EXIT_VALIDATION, exc)
    except OSError as exc:
        return _fail(EXIT_IO, exc)
    except InfoQueueError as exc:
        return _fail(EXIT_NUMERIC, exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
