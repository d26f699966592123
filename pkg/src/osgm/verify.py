"""The invariant suite behind ``osgm verify``.

Each registered check re-derives one family of guarantees from scratch at
a fixed seed (finite differences against analytic gradients, convexity and
smoothness witnesses, projection geometry, full monitored runs) and
returns standard check records.  The pytest suite reuses the same oracles.
"""

from __future__ import annotations

import math

import numpy as np

from . import stepsize as sz
from .diagnostics import CheckRecord, MonitorReport, piecewise_region_benchmark
from .feedback import hypergradient_feedback, ratio_feedback
from .learners import Schedule
from .problems import (
    Problem,
    make_logistic,
    make_piecewise_quadratic,
    make_random_quadratic,
    make_tridiagonal,
    tridiagonal_eigenvalues,
    with_counting,
)
from .solver import SolverConfig, run_hdm, run_osgm
from .stepsize import Stepsize


def witness_problems(seed: int):
    return [
        make_tridiagonal(12),
        make_random_quadratic(8, cond=30.0, seed=seed),
        make_piecewise_quadratic(),
        _small_logistic(seed),
    ]


def _small_logistic(seed: int) -> Problem:
    rng = np.random.default_rng(seed + 17)
    A = rng.standard_normal((20, 5))
    y = np.where(rng.standard_normal(20) > 0, 1.0, -1.0)
    return make_logistic(A, y, reg=0.1)


def random_stepsize(pattern: str, dim: int, rng, scale: float = 1.0) -> Stepsize:
    if pattern == "scalar":
        return sz.scalar_stepsize(scale * rng.standard_normal(), dim)
    if pattern == "diag":
        return sz.diag_stepsize(scale * rng.standard_normal(dim))
    return sz.full_stepsize(scale * rng.standard_normal((dim, dim)))


def feedback_value(problem: Problem, x, stepsize: Stepsize, kind: str) -> float:
    """Direct evaluation of a feedback value, used as the finite-difference
    oracle (no gradient machinery involved)."""
    x = np.asarray(x, dtype=float)
    g = problem.grad(x)
    prop = x - stepsize.apply(g)
    f_prop = problem.value(prop)
    if kind == "ratio":
        return (f_prop - problem.opt_value) / (problem.value(x) - problem.opt_value)
    return (f_prop - problem.value(x)) / float(g @ g)


def fd_feedback_gradient(problem, x, stepsize: Stepsize, kind: str, h: float = 1e-6):
    """Central finite differences of the feedback in the stepsize parameters."""

    def value_at(v):
        return feedback_value(problem, x, Stepsize(stepsize.pattern, v, stepsize.dim), kind)

    if stepsize.pattern == "scalar":
        return (value_at(stepsize.value + h) - value_at(stepsize.value - h)) / (2 * h)
    base = np.array(stepsize.value, dtype=float)
    grad = np.zeros_like(base)
    it = np.nditer(base, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        up = base.copy()
        up[idx] += h
        down = base.copy()
        down[idx] -= h
        grad[idx] = (value_at(up) - value_at(down)) / (2 * h)
    return grad


# -- individual checks -------------------------------------------------------


def check_problem_smoothness(seed: int):
    rng = np.random.default_rng(seed)
    worst = math.inf
    count = 0
    for problem in witness_problems(seed):
        for _ in range(100):
            x = rng.standard_normal(problem.dim) * 3.0
            y = rng.standard_normal(problem.dim) * 3.0
            lhs = np.linalg.norm(problem.grad(x) - problem.grad(y))
            rhs = problem.smoothness * np.linalg.norm(x - y)
            worst = min(worst, (rhs - lhs) + 1e-8 * rhs)
            count += 1
    return [CheckRecord.from_slack("problem_smoothness", count, worst, 0.0)]


def check_problem_gradients(seed: int):
    rng = np.random.default_rng(seed + 1)
    worst = math.inf
    count = 0
    for problem in witness_problems(seed):
        for _ in range(50):
            x = rng.standard_normal(problem.dim)
            g = problem.grad(x)
            fd = np.zeros(problem.dim)
            h = 1e-6
            for i in range(problem.dim):
                e = np.zeros(problem.dim)
                e[i] = h
                fd[i] = (problem.value(x + e) - problem.value(x - e)) / (2 * h)
            rel = np.linalg.norm(fd - g) / max(1.0, np.linalg.norm(g))
            worst = min(worst, 1e-5 - rel)
            count += 1
    return [CheckRecord.from_slack("problem_gradient_fd", count, worst, 0.0)]


def check_problem_curvature(seed: int):
    rng = np.random.default_rng(seed + 2)
    worst = math.inf
    count = 0
    for problem in witness_problems(seed):
        if problem.strong_convexity <= 0 or problem.opt_point is None:
            continue
        for _ in range(50):
            x = rng.standard_normal(problem.dim) * 2.0
            gap = problem.value(x) - problem.opt_value
            d = x - problem.opt_point
            lower = 0.5 * problem.strong_convexity * float(d @ d)
            worst = min(worst, gap - lower + 1e-9 * max(1.0, gap))
            count += 1
    return [CheckRecord.from_slack("problem_curvature_lower", count, worst, 0.0)]


def check_tridiagonal_spectrum(seed: int):
    worst = math.inf
    for n in (2, 3, 12, 50):
        problem = make_tridiagonal(n)
        dense = np.linalg.eigvalsh(problem.hessian_at_opt)
        formula = tridiagonal_eigenvalues(n)
        worst = min(worst, 1e-10 - float(np.max(np.abs(dense - formula))))
        worst = min(worst, 1e-10 - abs(problem.smoothness - dense[-1]))
        worst = min(worst, 1e-10 - abs(problem.strong_convexity - dense[0]))
    return [CheckRecord.from_slack("tridiagonal_spectrum", 4, worst, 0.0)]


def check_feedback_gradients(seed: int):
    rng = np.random.default_rng(seed + 3)
    problems = [
        make_random_quadratic(5, cond=12.0, seed=seed),
        make_tridiagonal(5),
        make_piecewise_quadratic(),
    ]
    records = []
    for kind in ("ratio", "hypergradient"):
        for pattern in sz.PATTERNS:
            worst = math.inf
            for _ in range(30):
                problem = problems[rng.integers(len(problems))]
                x = rng.standard_normal(problem.dim) * 2.0
                if abs(x[0]) < 0.3:
                    x[0] = 0.5  # keep clear of the piecewise kink for differencing
                P = random_stepsize(pattern, problem.dim, rng, scale=0.4)
                fn = ratio_feedback if kind == "ratio" else hypergradient_feedback
                sample = fn(problem, x, P)
                analytic = sz.contract_gradient(sample, pattern)
                fd = fd_feedback_gradient(problem, x, P, kind)
                err = sz.native_norm(pattern, np.asarray(analytic) - np.asarray(fd))
                scale = max(1.0, sz.native_norm(pattern, analytic))
                worst = min(worst, 1e-5 - err / scale)
            records.append(
                CheckRecord.from_slack(
                    f"feedback_gradient_fd[{kind},{pattern}]", 30, worst, 0.0
                )
            )
    return records


def check_feedback_shape(seed: int):
    """Convexity, smoothness, nonnegativity, and the rank-1 norm identity."""
    rng = np.random.default_rng(seed + 4)
    problems = [
        make_random_quadratic(6, cond=20.0, seed=seed + 1),
        make_tridiagonal(6),
        make_piecewise_quadratic(),
    ]
    worst_cvx = math.inf
    worst_smooth = math.inf
    worst_nonneg = math.inf
    worst_rank1 = math.inf
    count = 0
    for _ in range(40):
        problem = problems[rng.integers(len(problems))]
        n = problem.dim
        kind = ("ratio", "hypergradient")[rng.integers(2)]
        fn = ratio_feedback if kind == "ratio" else hypergradient_feedback
        x = rng.standard_normal(n) * 2.0
        if np.linalg.norm(problem.grad(x)) < 1e-6:
            continue
        P1 = random_stepsize("full", n, rng, scale=0.5)
        P2 = random_stepsize("full", n, rng, scale=0.5)
        t = rng.uniform()
        mid = sz.full_stepsize(t * P1.value + (1 - t) * P2.value)
        v1 = feedback_value(problem, x, P1, kind)
        v2 = feedback_value(problem, x, P2, kind)
        vm = feedback_value(problem, x, mid, kind)
        worst_cvx = min(worst_cvx, t * v1 + (1 - t) * v2 + 1e-10 - vm)
        s1 = fn(problem, x, P1)
        s2 = fn(problem, x, P2)
        g_diff = np.linalg.norm(s1.full_gradient() - s2.full_gradient())
        c = (
            2.0 * problem.smoothness**2
            if kind == "ratio"
            else problem.smoothness
        )
        bound = c * np.linalg.norm(P1.value - P2.value)
        worst_smooth = min(worst_smooth, bound - g_diff + 1e-8 * bound)
        if kind == "ratio":
            worst_nonneg = min(worst_nonneg, v1, v2)
        norm_direct = np.linalg.norm(s1.full_gradient())
        worst_rank1 = min(
            worst_rank1,
            1e-12 * max(1.0, norm_direct)
            - abs(norm_direct - s1.gradient_frobenius_norm()),
        )
        count += 1
    return [
        CheckRecord.from_slack("feedback_convexity", count, worst_cvx, 0.0),
        CheckRecord.from_slack("feedback_smoothness", count, worst_smooth, 0.0),
        CheckRecord.from_slack("feedback_nonnegative_ratio", count, worst_nonneg, 0.0),
        CheckRecord.from_slack("feedback_rank1_norm", count, worst_rank1, 0.0),
    ]


def check_projections(seed: int):
    rng = np.random.default_rng(seed + 5)
    sets = [
        sz.box(-0.25, 0.75),
        sz.nonnegative(),
        sz.frobenius_ball(sz.full_stepsize(0.1 * np.eye(4)), 0.9),
        sz.unconstrained(),
    ]
    worst_idem = math.inf
    worst_nonexp = math.inf
    count = 0
    for _ in range(200):
        cset = sets[rng.integers(len(sets))]
        if cset.kind == "frobenius_ball":
            pattern = "full"
        else:
            pattern = sz.PATTERNS[rng.integers(3)]
        P = random_stepsize(pattern, 4, rng, scale=2.0)
        Q = cset.project(random_stepsize(pattern, 4, rng, scale=0.4))
        proj = cset.project(P)
        worst_idem = min(
            worst_idem, 1e-12 - sz.distance(cset.project(proj), proj)
        )
        worst_nonexp = min(
            worst_nonexp, sz.distance(P, Q) - sz.distance(proj, Q) + 1e-12
        )
        count += 1
    return [
        CheckRecord.from_slack("projection_idempotent", count, worst_idem, 0.0),
        CheckRecord.from_slack("projection_nonexpansive", count, worst_nonexp, 0.0),
    ]


def check_pattern_contractions(seed: int):
    rng = np.random.default_rng(seed + 6)
    problem = make_random_quadratic(6, cond=9.0, seed=seed + 2)
    worst = math.inf
    for _ in range(25):
        x = rng.standard_normal(6)
        P = random_stepsize("diag", 6, rng, scale=0.3)
        sample = ratio_feedback(problem, x, P)
        full = sample.full_gradient()
        diag = sz.contract_gradient(sample, "diag")
        scal = sz.contract_gradient(sample, "scalar")
        worst = min(worst, 1e-13 - float(np.max(np.abs(np.diag(full) - diag))))
        worst = min(worst, 1e-13 * max(1.0, abs(scal)) - abs(np.trace(full) - scal))
        g = rng.standard_normal(6)
        embedded = sz.full_stepsize(sz.scalar_stepsize(0.7, 6).as_matrix())
        worst = min(
            worst,
            1e-14
            - float(
                np.max(np.abs(embedded.apply(g) - sz.scalar_stepsize(0.7, 6).apply(g)))
            ),
        )
    return [CheckRecord.from_slack("pattern_contraction", 25, worst, 0.0)]


def _monitored_runs(seed: int):
    """Short monitored runs across the variant grid for the run-level checks."""
    rng = np.random.default_rng(seed + 7)
    runs = []
    tri = make_tridiagonal(20)
    quad = make_random_quadratic(8, cond=25.0, seed=seed + 3)
    pw = make_piecewise_quadratic()
    for problem in (tri, quad):
        x1 = rng.standard_normal(problem.dim) * 2.0
        runs.append(
            (
                problem,
                SolverConfig(
                    x1=x1,
                    feedback="ratio",
                    action="lookahead",
                    pattern="full",
                    max_iters=250,
                    monitors_enabled=True,
                ),
            )
        )
        runs.append(
            (
                problem,
                SolverConfig(
                    x1=x1,
                    feedback="hypergradient",
                    action="monotone_lookahead",
                    pattern="full",
                    max_iters=250,
                    monitors_enabled=True,
                ),
            )
        )
        box = sz.box(0.0, 2.0 / problem.smoothness)
        runs.append(
            (
                problem,
                SolverConfig(
                    x1=x1,
                    feedback="ratio",
                    action="vanilla",
                    pattern="diag",
                    candidate_set=box,
                    max_iters=250,
                    monitors_enabled=True,
                ),
            )
        )
        runs.append(
            (
                problem,
                SolverConfig(
                    x1=x1,
                    feedback="hypergradient",
                    action="monotone",
                    pattern="diag",
                    candidate_set=box,
                    max_iters=250,
                    monitors_enabled=True,
                ),
            )
        )
    runs.append(
        (
            pw,
            SolverConfig(
                x1=np.array([-2.0, 1.5]),
                feedback="ratio",
                action="lookahead",
                pattern="diag",
                max_iters=300,
                monitors_enabled=True,
                benchmark_sequences={"region_hessian_inverse": piecewise_region_benchmark()},
            ),
        )
    )
    return runs


def check_monitored_runs(seed: int):
    records = []
    for problem, config in _monitored_runs(seed):
        _, report = run_osgm(problem, config)
        tag = f"{problem.name}/{config.feedback[0]}-{config.action}"
        for rec in report.records:
            rec.name = f"{rec.name}@{tag}"
            records.append(rec)
    return records


def hdm_lookahead_iterate_gap(problem, x1, steps: int) -> float:
    """Worst relative iterate difference between the swapped-order update
    and the lookahead hypergradient variant at matched rate 1/L."""
    eta = 1.0 / problem.smoothness
    xs_hdm, xs_osgm = {}, {}
    run_hdm(
        problem,
        SolverConfig(
            x1=x1,
            feedback="hypergradient",
            pattern="full",
            schedule=Schedule("constant", eta),
            max_iters=steps,
            stop_gap=0.0,
            stop_grad=0.0,
            iterate_hook=lambda k, x: xs_hdm.__setitem__(k, x.copy()),
        ),
    )
    run_osgm(
        problem,
        SolverConfig(
            x1=x1,
            feedback="hypergradient",
            action="lookahead",
            pattern="full",
            schedule=Schedule("constant", eta),
            max_iters=steps,
            stop_gap=0.0,
            stop_grad=0.0,
            unsafe=True,
            iterate_hook=lambda k, x: xs_osgm.__setitem__(k, x.copy()),
        ),
    )
    worst = 0.0
    for k in sorted(set(xs_hdm) & set(xs_osgm)):
        scale = max(np.linalg.norm(xs_hdm[k]), 1e-30)
        worst = max(worst, float(np.linalg.norm(xs_hdm[k] - xs_osgm[k])) / scale)
    return worst


def check_hdm_equivalence(seed: int):
    rng = np.random.default_rng(seed + 8)
    problem = make_random_quadratic(10, cond=15.0, seed=seed + 4)
    x1 = rng.standard_normal(10)
    worst = 1e-12 - hdm_lookahead_iterate_gap(problem, x1, 100)
    return [CheckRecord.from_slack("hdm_equivalence_iterates", 100, worst, 0.0)]


def check_determinism(seed: int):
    problem = make_tridiagonal(15)
    rng = np.random.default_rng(seed + 9)
    x1 = rng.standard_normal(15)
    config = SolverConfig(x1=x1, max_iters=120, monitors_enabled=False)
    t1, _ = run_osgm(problem, config)
    t2, _ = run_osgm(problem, config)
    ok = t1.equals(t2)
    return [
        CheckRecord.from_slack("determinism", 1, 0.0 if ok else -1.0, 0.0)
    ]


def check_oracle_accounting(seed: int):
    """Audit the trace's oracle counter against a counting wrapper."""
    rng = np.random.default_rng(seed + 10)
    records = []
    base = make_random_quadratic(6, cond=8.0, seed=seed + 5)
    expected_extra = {"vanilla": 2, "monotone": 2, "lookahead": 4, "monotone_lookahead": None}
    eta = 1.0 / (2.0 * base.smoothness**2)
    for action in ("vanilla", "monotone", "lookahead", "monotone_lookahead"):
        problem, counts = with_counting(base)
        x1 = rng.standard_normal(6)
        trace, _ = run_osgm(
            problem,
            SolverConfig(
                x1=x1,
                feedback="ratio",
                action=action,
                pattern="diag",
                schedule=Schedule("constant", eta),
                max_iters=60,
                stop_gap=0.0,
            ),
        )
        slack = 0.0 if counts.total == trace.oracle_calls[-1] else -1.0
        per_iter = expected_extra[action]
        if per_iter is not None and len(trace) > 0:
            budget = 2 + per_iter * len(trace)
            if counts.total != budget:
                slack = -1.0
        records.append(
            CheckRecord.from_slack(f"oracle_accounting[{action}]", len(trace), slack, 0.0)
        )
    return records


CHECKS = {
    "problem_smoothness": check_problem_smoothness,
    "problem_gradient_fd": check_problem_gradients,
    "problem_curvature": check_problem_curvature,
    "tridiagonal_spectrum": check_tridiagonal_spectrum,
    "feedback_gradient_fd": check_feedback_gradients,
    "feedback_shape": check_feedback_shape,
    "projections": check_projections,
    "pattern_contraction": check_pattern_contractions,
    "monitored_runs": check_monitored_runs,
    "hdm_equivalence": check_hdm_equivalence,
    "determinism": check_determinism,
    "oracle_accounting": check_oracle_accounting,
}


def run_verification(seed: int = 0, only: str = "") -> MonitorReport:
    report = MonitorReport([])
    for name, fn in CHECKS.items():
        records = fn(seed)
        for rec in records:
            if only and only not in rec.name and only not in name:
                continue
            report.add(rec)
    return report
