"""Command-line harness: single runs, the verification suite, and benches.

Exit codes: 0 success, 2 monitor failure under ``--strict``, 64 bad flags
or flag combinations, 65 configuration/oracle errors.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import math
import os
import sys
import tempfile

import numpy as np

from . import stepsize as sz
from .diagnostics import summarize
from .learners import Schedule
from .problems import (
    Problem,
    load_problem,
    make_logistic,
    make_piecewise_quadratic,
    make_quadratic,
    make_random_quadratic,
    make_tridiagonal,
)
from .solver import ConfigError, SolverConfig, run_gd, run_hdm, run_osgm
from .stepsize import scaled_identity
from .verify import run_verification

EXIT_OK = 0
EXIT_MONITOR = 2
EXIT_USAGE = 64
EXIT_CONFIG = 65

ACTION_FLAGS = {
    "vanilla": "vanilla",
    "monotone": "monotone",
    "lookahead": "lookahead",
    "monotone-lookahead": "monotone_lookahead",
}
FEEDBACK_FLAGS = {"ratio": "ratio", "hyper": "hypergradient"}
PATTERN_FLAGS = {"scalar": "scalar", "diag": "diag", "full": "full"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def parse_problem(spec: str, seed: int) -> Problem:
    """Problem from ``name:params`` or a JSON file path."""
    name, _, params = spec.partition(":")
    if name == "tridiagonal":
        return make_tridiagonal(int(params))
    if name == "piecewise2d":
        return make_piecewise_quadratic()
    if name == "diagquad":
        n = int(params)
        return make_quadratic(np.diag(np.arange(1.0, n + 1.0)), np.zeros(n))
    if name == "randquad":
        parts = params.split(",")
        n = int(parts[0])
        cond = float(parts[1]) if len(parts) > 1 else 10.0
        return make_random_quadratic(n, cond=cond, seed=seed)
    if name == "logistic":
        parts = params.split(",")
        m, n = int(parts[0]), int(parts[1])
        reg = float(parts[2]) if len(parts) > 2 else 0.1
        rng = np.random.default_rng(seed)
        A = rng.standard_normal((m, n))
        y = np.where(rng.standard_normal(m) > 0, 1.0, -1.0)
        return make_logistic(A, y, reg)
    if os.path.exists(spec):
        return load_problem(spec)
    raise ConfigError(f"unknown problem {spec!r} (not a builtin name or a file)")


def parse_set(spec: str, p1):
    if spec == "none":
        return sz.unconstrained()
    if spec == "nonneg":
        return sz.nonnegative()
    if spec.startswith("box:"):
        lo, hi = (float(v) for v in spec[4:].split(","))
        return sz.box(lo, hi)
    if spec.startswith("ball:"):
        return sz.frobenius_ball(p1, float(spec[5:]))
    raise ConfigError(f"unknown candidate set {spec!r}")


def _add_shared_flags(p: argparse.ArgumentParser):
    p.add_argument("--problem", default="tridiagonal:50")
    p.add_argument("--feedback", choices=sorted(FEEDBACK_FLAGS), default="ratio")
    p.add_argument("--action", choices=sorted(ACTION_FLAGS), default="lookahead")
    p.add_argument("--learner", choices=["ogd", "adagrad"], default="ogd")
    p.add_argument("--pattern", choices=sorted(PATTERN_FLAGS), default="full")
    p.add_argument("--set", dest="cset", default="none")
    p.add_argument("--eta", default="auto")
    p.add_argument("--iters", type=int, default=500)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trace", default=None)
    p.add_argument("--monitors", choices=["on", "off"], default="on")
    p.add_argument("--strict", action="store_true")
    p.add_argument("--unsafe", action="store_true")


def build_parser() -> _Parser:
    parser = _Parser(prog="osgm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one experiment", parents=[], add_help=True)
    _add_shared_flags(run_p)
    run_p.add_argument("--mode", choices=["osgm", "hdm", "gd"], default="osgm")
    run_p.add_argument("--report", default=None, help="monitor report JSON path")

    verify_p = sub.add_parser("verify", help="run the invariant suite")
    verify_p.add_argument("--only", default="")
    verify_p.add_argument("--seed", type=int, default=0)

    bench_p = sub.add_parser("bench", help="run the variant matrix")
    bench_p.add_argument("--problem", action="append", default=None)
    bench_p.add_argument("--pattern", choices=sorted(PATTERN_FLAGS), default="diag")
    bench_p.add_argument("--iters", type=int, default=2000)
    bench_p.add_argument("--tol", type=float, default=1e-8)
    bench_p.add_argument("--seed", type=int, default=0)
    bench_p.add_argument("--csv", default=None, help="directory for per-cell traces")
    return parser


def _default_x1(problem: Problem, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.standard_normal(problem.dim)


def cmd_run(args) -> int:
    feedback = FEEDBACK_FLAGS[args.feedback]
    action = ACTION_FLAGS[args.action]
    if args.mode == "osgm" and feedback == "hypergradient" and action in (
        "vanilla",
        "lookahead",
    ) and not args.unsafe:
        print(
            "osgm run: error: hypergradient feedback requires a monotone action "
            "(monotone or monotone-lookahead): its convergence reduction needs "
            "nonincreasing objective values. Pass --unsafe to override.",
            file=sys.stderr,
        )
        return EXIT_USAGE
    try:
        problem = parse_problem(args.problem, args.seed)
        x1 = _default_x1(problem, args.seed)
        p1 = scaled_identity(1.0 / problem.smoothness, problem.dim, PATTERN_FLAGS[args.pattern])
        cset = parse_set(args.cset, p1)
        schedule = "auto" if args.eta == "auto" else Schedule("constant", float(args.eta))
        config = SolverConfig(
            x1=x1,
            feedback=feedback,
            action=action,
            learner=args.learner,
            pattern=PATTERN_FLAGS[args.pattern],
            candidate_set=cset,
            p1=p1,
            schedule=schedule,
            max_iters=args.iters,
            stop_gap=args.tol,
            monitors_enabled=args.monitors == "on",
            seed=args.seed,
            unsafe=args.unsafe,
        )
        if args.mode == "gd":
            step = p1 if args.eta == "auto" else scaled_identity(
                float(args.eta), problem.dim, PATTERN_FLAGS[args.pattern]
            )
            trace = run_gd(problem, step, x1, args.iters, stop_gap=args.tol)
            report = None
        elif args.mode == "hdm":
            trace = run_hdm(problem, config)
            report = None
        else:
            trace, report = run_osgm(problem, config)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"osgm run: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.trace:
        trace.to_csv(args.trace)
    gap = trace.final_gap
    gap_text = "" if math.isnan(gap) else f" final_gap={gap:.6e}"
    print(f"{trace.meta.get('problem')}: {trace.status} after {len(trace)} iterations{gap_text}")
    if report is not None and report.enabled:
        print(summarize(report))
        if args.report:
            with open(args.report, "w", encoding="utf-8") as fh:
                fh.write(report.to_json())
        if args.strict and not report.passed:
            return EXIT_MONITOR
    return EXIT_OK


def cmd_verify(args) -> int:
    report = run_verification(seed=args.seed, only=args.only)
    print(summarize(report))
    return EXIT_OK if report.passed else 1


BENCH_VARIANTS = (
    ("ratio", "vanilla"),
    ("ratio", "monotone"),
    ("ratio", "lookahead"),
    ("ratio", "monotone_lookahead"),
    ("hypergradient", "monotone"),
    ("hypergradient", "monotone_lookahead"),
)


def _bench_cell(problem, variant, pattern, iters, tol, seed):
    x1 = _default_x1(problem, seed)
    if variant == "gd":
        step = scaled_identity(1.0 / problem.smoothness, problem.dim, pattern)
        return run_gd(problem, step, x1, iters, stop_gap=tol)
    if variant == "hdm":
        config = SolverConfig(
            x1=x1,
            feedback="hypergradient",
            pattern="diag" if pattern == "scalar" else pattern,
            max_iters=iters,
            stop_gap=tol,
            seed=seed,
        )
        return run_hdm(problem, config)
    feedback, action = variant
    cset = sz.unconstrained()
    if action in ("vanilla", "monotone"):
        # the analyzed schedules for these actions need a bounded set
        cset = sz.box(0.0, 2.0 / problem.smoothness)
    config = SolverConfig(
        x1=x1,
        feedback=feedback,
        action=action,
        pattern=pattern,
        candidate_set=cset,
        max_iters=iters,
        stop_gap=tol,
        seed=seed,
        monitors_enabled=False,
    )
    trace, _ = run_osgm(problem, config)
    return trace


def iterations_to_tolerance(trace, tol: float):
    """First k with the recorded gap at x^(k+1) at or below tol."""
    gaps = trace.f_gap
    for i in range(len(gaps) - 1):
        if gaps[i + 1] <= tol:
            return int(trace.k[i])
    if not math.isnan(trace.final_gap) and trace.final_gap <= tol:
        return int(len(gaps))
    return None


def terminal_contraction(trace):
    """Geometric mean of the last few per-step gap ratios."""
    gaps = [g for g in trace.f_gap if not math.isnan(g)]
    if not math.isnan(trace.final_gap):
        gaps.append(trace.final_gap)
    ratios = [
        b / a for a, b in zip(gaps[:-1], gaps[1:]) if a > 0 and b > 0
    ][-10:]
    if not ratios:
        return None
    return float(np.exp(np.mean(np.log(ratios))))


def _variant_label(variant) -> str:
    if isinstance(variant, str):
        return variant
    feedback, action = variant
    short = "r" if feedback == "ratio" else "h"
    return f"{action.replace('_', '-')}-{short}"


def _atomic_write_csv(trace, directory, label):
    os.makedirs(directory, exist_ok=True)
    final_path = os.path.join(directory, f"{label}.csv")
    fd, tmp_path = tempfile.mkstemp(dir=directory, suffix=".tmp")
    os.close(fd)
    trace.to_csv(tmp_path)
    os.replace(tmp_path, final_path)
    return final_path


def cmd_bench(args) -> int:
    specs = args.problem or ["tridiagonal:100", "diagquad:100", "piecewise2d"]
    try:
        problems = [(spec, parse_problem(spec, args.seed)) for spec in specs]
    except (ConfigError, ValueError, OSError) as exc:
        print(f"osgm bench: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    pattern = PATTERN_FLAGS[args.pattern]
    variants = list(BENCH_VARIANTS) + ["gd", "hdm"]
    cells = [
        (spec, problem, variant) for spec, problem in problems for variant in variants
    ]
    workers = max(1, int(os.environ.get("OSGM_THREADS", "1")))
    results = {}
    failures = []

    def run_cell(cell):
        spec, problem, variant = cell
        try:
            trace = _bench_cell(problem, variant, pattern, args.iters, args.tol, args.seed)
            label = f"{spec.replace(':', '-')}__{_variant_label(variant)}"
            if args.csv:
                _atomic_write_csv(trace, args.csv, label)
            return cell, trace, None
        except Exception as exc:  # report per cell, keep the matrix going
            return cell, None, str(exc)

    if workers == 1:
        outcomes = list(map(run_cell, cells))
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run_cell, cells))
    for cell, trace, error in outcomes:
        spec, _, variant = cell
        if error is not None:
            failures.append((spec, _variant_label(variant), error))
        else:
            results[(spec, _variant_label(variant))] = trace
    header = f"{'problem':<18}{'variant':<24}{'iters_to_tol':>13}  {'terminal_rate':>14}"
    print(header)
    for spec, _, variant in cells:
        label = _variant_label(variant)
        trace = results.get((spec, label))
        if trace is None:
            continue
        its = iterations_to_tolerance(trace, args.tol)
        rate = terminal_contraction(trace)
        its_text = str(its) if its is not None else f">{len(trace)}"
        rate_text = f"{rate:.6f}" if rate is not None else ""
        print(f"{spec:<18}{label:<24}{its_text:>13}  {rate_text:>14}")
    for spec, label, msg in failures:
        print(f"FAILED {spec} {label}: {msg}", file=sys.stderr)
    return EXIT_OK if not failures else 1


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else EXIT_USAGE
    if args.command == "run":
        return cmd_run(args)
    if args.command == "verify":
        return cmd_verify(args)
    return cmd_bench(args)


if __name__ == "__main__":
    sys.exit(main())
