"""Command line entry point: ``scpir trial|sweep|audit|bounds|serve``.

Exit status is 0 when every check passes, 1 when any invariant is violated,
2 on a usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from fractions import Fraction

from . import bounds
from .core import ParameterError, make_params
from .harness import ScaleError, StageError, TrialConfig, make_messages, run_trial, sweep, write_sweep_csv
from .placement import save_placement, split_messages
from .privacy import ScaleError as AuditScaleError
from .privacy import verify_privacy_exact, verify_privacy_sampled
from .protocol import Mutation


class UsageError(Exception):
    pass


def parse_grid(text: str, N: int) -> list[Fraction]:
    if "/" in text or "," in text or "." in text:
        return [Fraction(v.strip()) for v in text.split(",") if v.strip()]
    n = int(text)
    if n < 1:
        raise UsageError("--grid needs at least one point")
    return bounds.mu_grid(N, n)


def _desired(text: str):
    return "all" if text == "all" else int(text)


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _config(args) -> TrialConfig:
    if (args.t is None) == (args.mu is None):
        raise UsageError("give exactly one of --t and --mu")
    endpoints = args.endpoints.split(",") if args.endpoints else None
    return TrialConfig(args.n, args.k, t=args.t, mu=None if args.mu is None else Fraction(args.mu),
                       seed=args.seed, desired=_desired(args.desired), source=args.source,
                       source_path=args.message_file, mode=args.mode, endpoints=endpoints)


def cmd_trial(args) -> int:
    cfg = _config(args)
    if args.save_placement:
        if cfg.t is None:
            raise UsageError("--save-placement needs --t")
        params = make_params(cfg.N, cfg.K, cfg.t)
        save_placement(args.save_placement, split_messages(list(make_messages(cfg, params.K, params.L)), params),
                       params)
    report = run_trial(cfg)
    d = report.to_dict()
    if args.format == "json":
        text = json.dumps(d, indent=2) + "\n"
    elif args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(list(d))
        w.writerow([json.dumps(v) if isinstance(v, (list, dict)) else v for v in d.values()])
        text = buf.getvalue()
    else:
        text = "".join(f"{k}: {v}\n" for k, v in d.items())
    _emit(text, args.out)
    return 0 if report.passed else 1


def cmd_sweep(args) -> int:
    grid = parse_grid(args.grid, args.n)
    rows = sweep(args.n, args.k, grid, seed=args.seed, mode=args.mode, measure=not args.no_measure)
    if args.format == "json":
        text = json.dumps([
            {"mu": str(r.mu), "achievable": str(r.achievable), "lower": str(r.lower), "lp": str(r.lp),
             "measured": None if r.measured is None else str(r.measured), "violation": r.violation,
             "answers_digest": r.report.answers_digest if r.report else None,
             "decoded_digest": r.report.decoded_digest if r.report else None}
            for r in rows], indent=2) + "\n"
    else:
        buf = io.StringIO()
        write_sweep_csv(buf, rows)
        text = buf.getvalue()
    _emit(text, args.out)
    return 1 if any(r.violation for r in rows) else 0


def cmd_audit(args) -> int:
    params = make_params(args.n, args.k, args.t)
    mutation = None
    if args.skip_stage is not None or args.unpermuted_desired:
        mutation = Mutation(args.skip_stage, args.unpermuted_desired)
    method = args.method
    if method in ("exact", "auto"):
        try:
            report = verify_privacy_exact(params, args.db, mutation=mutation)
        except AuditScaleError as exc:
            if method == "exact":
                raise UsageError(str(exc)) from exc
            method = "sampled"
    if method == "sampled":
        report = verify_privacy_sampled(params, args.db, trials=args.trials, seed=args.seed, mutation=mutation)
    if args.format == "json":
        text = json.dumps({
            "parameters": {"N": params.N, "K": params.K, "t": params.t, "mu": str(params.mu), "L": params.L},
            "mode": report.mode, "passed": report.passed,
            "verdicts": [{"db": v.db, "passed": v.passed, "detail": v.detail, "vacuous": v.vacuous,
                          "statistic": v.statistic, "dof": v.dof, "pvalue": v.pvalue,
                          "witness": None if v.witness is None else repr(v.witness),
                          "witness_values": {str(i): str(p) for i, p in v.probabilities.items()}}
                         for v in report.verdicts],
        }, indent=2) + "\n"
    else:
        text = report.to_text()
    _emit(text, args.out)
    return 0 if report.passed else 1


def cmd_bounds(args) -> int:
    N, K = args.n, args.k
    corners = bounds.corner_points(N, K)
    grid = parse_grid(args.grid, N) if args.grid else [p[0] for p in corners.points]
    if args.mu is not None:
        grid = [Fraction(args.mu)]
    rows = []
    ok = corners.lower_hull().is_convex() and corners.lower_hull().is_nonincreasing()
    for mu in grid:
        hull = bounds.hull_achievable(mu, N, K)
        lower = bounds.lower_bound(mu, N, K)
        lp, x = bounds.lp_lower_bound(mu, N, K)
        ok = ok and hull == lower == lp
        rows.append((mu, hull, lower, lp, x))
    if args.corners_out:
        with open(args.corners_out, "w", newline="") as fh:
            bounds.write_curve_csv(fh, corners.points)
    if args.format == "csv":
        buf = io.StringIO()
        bounds.write_curve_csv(buf, [(mu, hull) for mu, hull, *_ in rows])
        text = buf.getvalue()
    elif args.format == "json":
        text = json.dumps({
            "corners": [[str(m), str(d)] for m, d in corners.points],
            "lines": {str(j): [str(bounds.line_bound(j, 0, N, K)), str(bounds.line_bound(j, 1, N, K)
                                                                       - bounds.line_bound(j, 0, N, K))]
                      for j in range(1, N)},
            "points": [{"mu": str(mu), "hull": str(h), "lower": str(lo), "lp": str(lp), "x": [str(v) for v in x]}
                       for mu, h, lo, lp, x in rows],
            "consistent": ok,
        }, indent=2) + "\n"
    else:
        lines = [f"corner points (N={N}, K={K}):"]
        lines += [f"  mu={m}  D={d}" for m, d in corners.points]
        for j in range(1, N):
            a = bounds.line_bound(j, 0, N, K)
            b = bounds.line_bound(j, 1, N, K) - a
            lines.append(f"  line j={j}: D >= {a} + ({b}) mu")
        for mu, h, lo, lp, x in rows:
            lines.append(f"mu={mu}: hull={h} lower={lo} lp={lp} x=({', '.join(map(str, x))})")
        lines.append(f"consistent: {ok}")
        text = "\n".join(lines) + "\n"
    _emit(text, args.out)
    return 0 if ok else 1


def cmd_serve(args) -> int:
    from .net import serve_database

    if args.n is not None:
        if args.k is None or args.t is None:
            raise UsageError("building a placement needs --n, --k and --t")
        params = make_params(args.n, args.k, args.t)
        cfg = TrialConfig(args.n, args.k, t=args.t, seed=args.seed, source=args.source, source_path=args.message_file)
        save_placement(args.placement, split_messages(list(make_messages(cfg, params.K, params.L)), params), params)

    def ready(endpoint):
        print(f"DB{args.db} listening on {endpoint}", flush=True)

    try:
        serve_database(args.db, args.placement, args.listen, ready=ready)
    except KeyboardInterrupt:
        pass
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="scpir", description="Storage-constrained private information retrieval")
    sub = p.add_subparsers(dest="command", required=True)

    def nk(sp, t=True):
        sp.add_argument("--n", type=int, required=True, help="number of databases")
        sp.add_argument("--k", type=int, required=True, help="number of messages")
        if t:
            sp.add_argument("--t", type=int, help="placement parameter, mu = t/N")

    def source(sp):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--source", choices=["random", "zero", "file"], default="random")
        sp.add_argument("--message-file")

    sp = sub.add_parser("trial", help="run one end-to-end retrieval")
    nk(sp)
    sp.add_argument("--mu", help="storage fraction; non-corner values use memory sharing")
    source(sp)
    sp.add_argument("--desired", default="1", help="message index or 'all'")
    sp.add_argument("--mode", choices=["inproc", "net"], default="inproc")
    sp.add_argument("--endpoints", help="comma-separated host:port list, one per database")
    sp.add_argument("--save-placement", help="also write the placement file here")
    sp.add_argument("--format", choices=["text", "json", "csv"], default="text")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_trial)

    sp = sub.add_parser("sweep", help="measured cost against both bounds over a mu grid")
    nk(sp, t=False)
    sp.add_argument("--grid", default="16", help="point count or comma-separated rationals")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--mode", choices=["inproc", "net"], default="inproc")
    sp.add_argument("--no-measure", action="store_true", help="bounds only, skip the trials")
    sp.add_argument("--format", choices=["csv", "json"], default="csv")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("audit", help="privacy audit of the query distribution")
    nk(sp)
    sp.add_argument("--db", type=int, help="audit one database (default: all)")
    sp.add_argument("--method", choices=["auto", "exact", "sampled"], default="auto")
    sp.add_argument("--trials", type=int, default=10_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--skip-stage", type=int, help="negative control: drop undesired sums at this stage")
    sp.add_argument("--unpermuted-desired", action="store_true", help="negative control: no shuffle of W_k*")
    sp.add_argument("--format", choices=["text", "json"], default="text")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_audit)

    sp = sub.add_parser("bounds", help="corner points, converse lines, LP")
    nk(sp, t=False)
    sp.add_argument("--mu")
    sp.add_argument("--grid", help="point count or comma-separated rationals")
    sp.add_argument("--format", choices=["text", "json", "csv"], default="text")
    sp.add_argument("--out")
    sp.add_argument("--corners-out", help="write the corner points as CSV")
    sp.set_defaults(func=cmd_bounds)

    sp = sub.add_parser("serve", help="serve one database over TCP")
    sp.add_argument("--placement", required=True)
    sp.add_argument("--db", type=int, required=True)
    sp.add_argument("--listen", default="127.0.0.1:9000")
    sp.add_argument("--n", type=int, help="with --k/--t: build the placement file first")
    sp.add_argument("--k", type=int)
    sp.add_argument("--t", type=int)
    source(sp)
    sp.set_defaults(func=cmd_serve)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (UsageError, ParameterError, ScaleError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
