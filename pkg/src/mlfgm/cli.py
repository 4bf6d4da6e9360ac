"""Command-line interface: ``gen``, ``solve``, ``bench`` and ``verify``.

Exit codes: 0 success, 1 solver warning flags or failed checks, 2 usage or
input errors. Log verbosity comes from ``MLFGM_LOG_LEVEL`` (default WARNING).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import fields, replace
from pathlib import Path


from .affinity import integrate_layers
from .baseline import build_single_layer, spectral_match
from .bench import METHODS, SWEEPS, run_experiment, single_layer_match, uniform_objective
from .factorization import factorize
from .io import (
    load_problem,
    save_problem,
    save_result,
    solve_result_dict,
    write_bench_csv,
    write_curve_table,
)
from .solver import SolveReport, SolverConfig, solve_mlfgm
from .synthetic import SyntheticParams, accuracy, generate_synthetic_pair
from .verify import run_all

log = logging.getLogger("mlfgm")

EXIT_OK, EXIT_WARN, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mlfgm", description="Multi-layer factorized graph matching.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    g = sub.add_parser("gen", help="write a synthetic problem file")
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--inliers", type=int, default=20)
    g.add_argument("--outliers", type=int, default=2)
    g.add_argument("--attributes", type=int, default=5)
    g.add_argument("--deformation", type=float, default=0.0)
    g.add_argument("--config", help="JSON object of SyntheticParams fields")

    s = sub.add_parser("solve", help="solve a problem file")
    s.add_argument("problem")
    s.add_argument("--method", choices=METHODS, default="mlfgm")
    s.add_argument("--theta-step", type=float, default=0.01)
    s.add_argument("--no-confidence-update", action="store_true")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", help="result JSON path (stdout if omitted)")

    b = sub.add_parser("bench", help="run a synthetic sweep")
    b.add_argument("--kind", choices=sorted(SWEEPS))
    b.add_argument("--trials", type=int)
    b.add_argument("--seed", type=int)
    b.add_argument("--methods", help="comma-separated subset of " + ",".join(METHODS))
    b.add_argument("--values", help="comma-separated sweep values")
    b.add_argument("--theta-step", type=float)
    b.add_argument("--no-confidence-update", action="store_true")
    b.add_argument("--config", help="JSON config file")
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--timing", action="store_true", help="add a wall_time column")
    b.add_argument("--out", required=True,
                   help="CSV path; a .json summary and a .dat curve table are written beside it")

    v = sub.add_parser("verify", help="run oracle and property checks")
    v.add_argument("--quick", action="store_true", help="fewer random instances")
    return p


def _params_from(obj: dict) -> dict:
    known = {f.name for f in fields(SyntheticParams)}
    bad = sorted(set(obj) - known)
    if bad:
        raise UsageError(f"unknown synthetic parameter(s): {', '.join(bad)}")
    out = dict(obj)
    if "omega_range" in out:
        out["omega_range"] = tuple(out["omega_range"])
    return out


def _read_config(path) -> dict:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path}: line {exc.lineno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise UsageError("config must be a JSON object")
    return data


def cmd_gen(args) -> int:
    params = dict(n_inliers=args.inliers, n_outliers=args.outliers,
                  n_attributes=args.attributes, deformation=args.deformation, seed=args.seed)
    if args.config:
        params.update(_params_from(_read_config(args.config)))
    problem = generate_synthetic_pair(SyntheticParams(**params))
    save_problem(args.out, problem)
    log.info("wrote %s", args.out)
    return EXIT_OK


def cmd_solve(args) -> int:
    problem = load_problem(args.problem)
    fp, mapping = factorize(problem)
    cfg = SolverConfig(theta_step=args.theta_step,
                       confidence_update=not args.no_confidence_update, seed=args.seed)
    if args.method == "mlfgm":
        report = solve_mlfgm(fp, cfg, mapping)
    else:
        if args.method == "sm-integrated":
            kp, kq = integrate_layers(problem.affinities)
            X = spectral_match(build_single_layer(kp, kq, problem.g1, problem.g2)).assignment
        else:
            if problem.ground_truth is None:
                raise UsageError("sm-single-best picks a layer by accuracy and needs ground truth")
            _, X = max((single_layer_match(problem, k)
                        for k in range(problem.affinities.n_layers)), key=lambda t: t[0])
        report = SolveReport(assignment=X)
    acc = None if problem.ground_truth is None else accuracy(report.assignment, problem.ground_truth)
    result = solve_result_dict(report, args.method, uniform_objective(problem, fp, report.assignment), acc)
    if args.out:
        save_result(args.out, result)
    else:
        json.dump(result, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
    for flag in report.flags:
        print(f"warning: {flag}", file=sys.stderr)
    return EXIT_WARN if report.flags else EXIT_OK


def cmd_bench(args) -> int:
    conf = _read_config(args.config) if args.config else {}
    allowed = {"kind", "trials", "seed", "methods", "values", "params", "solver", "jobs"}
    bad = sorted(set(conf) - allowed)
    if bad:
        raise UsageError(f"unknown config key(s): {', '.join(bad)}")
    kind = args.kind or conf.get("kind")
    if kind is None:
        raise UsageError("--kind is required (or 'kind' in the config)")
    trials = args.trials if args.trials is not None else conf.get("trials", 30)
    seed = args.seed if args.seed is not None else conf.get("seed", 0)
    methods = args.methods.split(",") if args.methods else conf.get("methods", ["mlfgm", "sm-integrated"])
    values = [float(v) for v in args.values.split(",")] if args.values else conf.get("values")
    solver = dict(conf.get("solver", {}))
    if args.theta_step is not None:
        solver["theta_step"] = args.theta_step
    if args.no_confidence_update:
        solver["confidence_update"] = False
    try:
        cfg = SolverConfig(**solver)
    except TypeError as exc:
        raise UsageError(f"bad solver config: {exc}") from None
    base = None
    if "params" in conf:
        fixed = SWEEPS[kind][2] if kind in SWEEPS else {}
        base = replace(SyntheticParams(**fixed), **_params_from(conf["params"]))
    jobs = args.jobs if args.jobs != 1 else conf.get("jobs", 1)

    result = run_experiment(kind, base, trials, tuple(methods), values, seed, cfg, jobs)
    out = Path(args.out)
    write_bench_csv(out, result.records, include_timing=args.timing)
    summary = result.summary()
    if not args.timing:
        summary.pop("wall_times")
    summary.update(kind=kind, seed=seed, methods=list(methods))
    out.with_suffix(".json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n",
                                        encoding="utf-8")
    write_curve_table(out.with_suffix(".dat"), result)
    for p in result.points:
        cells = "  ".join(f"{m}={p.mean[m]:.3f}" for m in methods)
        print(f"{result.sweep_variable}={p.value:g}  {cells}")
    return EXIT_OK


def cmd_verify(args) -> int:
    checks = run_all(quick=args.quick)
    for c in checks:
        print(c.line())
    return EXIT_OK if all(c.passed for c in checks) else EXIT_WARN


def main(argv=None) -> int:
    level = os.environ.get("MLFGM_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = _parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        handler = {"gen": cmd_gen, "solve": cmd_solve, "bench": cmd_bench, "verify": cmd_verify}
        return handler[args.command](args)
    except UsageError as exc:
        print(f"mlfgm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as exc:
        print(f"mlfgm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
