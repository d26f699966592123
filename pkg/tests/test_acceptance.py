"""Acceptance suite: every release criterion at its stated tolerance.

Each test prints one PASS line (with its runtime) once its assertions
hold; run with ``pytest tests/test_acceptance.py -s`` to see the ledger.
"""

import math
import time

import numpy as np
import pytest

import osgm.stepsize as sz
from osgm import (
    make_logistic,
    make_piecewise_quadratic,
    make_quadratic,
    make_random_quadratic,
    make_tridiagonal,
    piecewise_region_benchmark,
    sublevel_radius,
)
from osgm.diagnostics import hessian_inverse_stepsize
from osgm.problems import tridiagonal_eigenvalues
from osgm.solver import SolverConfig, SolverTrace, run_osgm
from osgm.verify import (
    check_feedback_gradients,
    hdm_lookahead_iterate_gap,
)


def _stamp(start, name, budget):
    elapsed = time.time() - start
    assert elapsed < budget, f"{name} exceeded its {budget}s budget ({elapsed:.1f}s)"
    print(f"{name}: PASS ({elapsed:.1f}s)")


def _records(report, prefix):
    return [r for r in report.records if r.name.startswith(prefix)]


# -- criterion 1: analytic feedback gradients vs central differences --------


def test_criterion_01_gradient_oracles():
    start = time.time()
    records = check_feedback_gradients(seed=0)
    assert len(records) == 6  # two feedbacks x three patterns, 30 triples each
    for rec in records:
        assert rec.checked == 30
        assert rec.passed, rec.name
    _stamp(start, "criterion 01 (feedback gradient oracles)", 5.0)


# -- criteria 2 and 3: per-step inequalities on the action/feedback grid ----


@pytest.fixture(scope="module")
def grid_runs():
    build_start = time.time()
    problems = [
        (make_tridiagonal(50), np.ones(50)),
        (
            make_random_quadratic(20, cond=30.0, seed=7),
            np.random.default_rng(8).standard_normal(20) * 2.0,
        ),
        (make_piecewise_quadratic(), np.array([-2.0, 1.0])),
    ]
    runs = []
    for problem, x1 in problems:
        for feedback in ("ratio", "hypergradient"):
            for action in ("vanilla", "monotone", "lookahead", "monotone_lookahead"):
                lookahead = action in ("lookahead", "monotone_lookahead")
                cset = (
                    sz.unconstrained()
                    if lookahead
                    else sz.box(0.0, 2.0 / problem.smoothness)
                )
                sequences = None
                if problem.dim == 2 and feedback == "ratio" and lookahead:
                    sequences = {
                        "region_hessian_inverse": piecewise_region_benchmark(
                            "full" if lookahead else "diag"
                        )
                    }
                config = SolverConfig(
                    x1=x1,
                    feedback=feedback,
                    action=action,
                    pattern="full" if lookahead else "diag",
                    candidate_set=cset,
                    max_iters=1000,
                    stop_gap=0.0,
                    monitors_enabled=True,
                    unsafe=True,
                    benchmark_sequences=sequences,
                )
                trace, report = run_osgm(problem, config)
                runs.append((problem, config, trace, report))
    return runs, time.time() - build_start


def test_criterion_02_action_progress_inequalities(grid_runs):
    runs, build_seconds = grid_runs
    start = time.time() - build_seconds
    seen = set()
    for problem, config, trace, report in runs:
        recs = _records(report, "action_progress")
        assert recs, (problem.name, config.action)
        for rec in recs:
            assert rec.worst_slack >= -1e-10, (problem.name, rec.name, rec.worst_slack)
            assert rec.passed
            seen.add((config.feedback, config.action))
    assert len(seen) == 8  # all four actions under both feedbacks
    _stamp(start, "criterion 02 (progress inequalities, 4 actions x 2 feedbacks)", 30.0)


def test_criterion_03_learner_inequalities(grid_runs):
    runs, _ = grid_runs
    start = time.time()
    dynamic_seen = False
    for problem, config, trace, report in runs:
        for rec in _records(report, "ogd_step"):
            assert rec.worst_slack >= -1e-10, (problem.name, rec.name)
        for rec in _records(report, "static_regret"):
            assert rec.worst_slack >= -1e-10, (problem.name, rec.name)
        names = {r.name for r in report.records}
        assert "ogd_step[initial_stepsize]" in names
        assert "ogd_step[inv_smoothness]" in names
        if problem.hessian_at_opt is not None and config.pattern == "full":
            assert "ogd_step[hessian_inverse]" in names
        for rec in _records(report, "dynamic_regret"):
            if rec.status != "skipped":
                assert rec.worst_slack >= -1e-10
                dynamic_seen = True
    assert dynamic_seen  # the region-switching benchmark sequence was monitored
    _stamp(start, "criterion 03 (per-step, static, dynamic regret)", 30.0)


# -- criteria 4, 5, 8: the two long ratio/lookahead runs --------------------


@pytest.fixture(scope="module")
def long_ratio_runs():
    build_start = time.time()
    runs = []
    for problem, x1 in (
        (make_tridiagonal(100), np.random.default_rng(0).standard_normal(100)),
        (
            make_quadratic(np.diag(np.arange(1.0, 101.0)), np.zeros(100)),
            np.random.default_rng(1).standard_normal(100),
        ),
    ):
        config = SolverConfig(
            x1=x1,
            feedback="ratio",
            action="lookahead",
            pattern="full",
            max_iters=5000,
            stop_gap=0.0,
            monitors_enabled=True,
        )
        trace, report = run_osgm(problem, config)
        runs.append((problem, trace, report))
    return runs, time.time() - build_start


def test_criterion_04_best_of_two_global_rate(long_ratio_runs):
    runs, build_seconds = long_ratio_runs
    start = time.time() - build_seconds
    for problem, trace, report in runs:
        rec = [r for r in report.records if r.name == "best_of_two_rate"][0]
        assert rec.status == "pass"
        assert rec.worst_slack >= -1e-9  # normalized by K
        # independent evaluation straight from the trace
        kappa = problem.kappa
        L = problem.smoothness
        hess_inv = np.linalg.inv(problem.hessian_at_opt)
        C = L * L * np.linalg.norm(np.eye(100) / L - hess_inv) ** 2
        gaps = np.concatenate([trace.f_gap, [trace.final_gap]])
        for K in range(1, len(trace) + 1, 7):
            if gaps[K] <= 0:
                break
            lhs = math.log(gaps[K]) - math.log(gaps[0])
            branch1 = K * math.log1p(-1.0 / kappa)
            branch2 = K * math.log(C / K) if C / K > 0 else -math.inf
            assert lhs <= min(branch1, branch2) + 1e-9 * K
    _stamp(start, "criterion 04 (best-of-two rate, K <= 5000)", 60.0)


def test_criterion_05_potential_reductions(long_ratio_runs):
    runs, _ = long_ratio_runs
    start = time.time()
    for problem, trace, report in runs:
        rec = [r for r in report.records if r.name == "potential_log[hessian_inverse]"][0]
        assert rec.status == "pass"
        assert rec.worst_slack >= -1e-9
        L = problem.smoothness
        phis = trace.potential_phi
        for a, b in zip(phis[:-1], phis[1:]):
            assert b - a <= -1.0 / (L * L) + 1e-9
    # the hypergradient analog with rate 1/L
    for problem, x1 in (
        (make_tridiagonal(100), np.random.default_rng(0).standard_normal(100)),
        (
            make_quadratic(np.diag(np.arange(1.0, 101.0)), np.zeros(100)),
            np.random.default_rng(1).standard_normal(100),
        ),
    ):
        config = SolverConfig(
            x1=x1,
            feedback="hypergradient",
            action="monotone_lookahead",
            pattern="full",
            max_iters=2000,
            stop_gap=0.0,
            monitors_enabled=True,
        )
        _, report = run_osgm(problem, config)
        for name in ("potential_log[inv_smoothness]", "potential_reciprocal"):
            rec = [r for r in report.records if r.name == name][0]
            assert rec.status == "pass", name
            assert rec.worst_slack >= -1e-9
    _stamp(start, "criterion 05 (potential reductions)", 60.0)


def test_criterion_08_negative_regret_dichotomy(long_ratio_runs):
    runs, _ = long_ratio_runs
    start = time.time()
    for problem, trace, report in runs:
        recs = _records(report, "negative_regret")
        assert len(recs) == 3
        for rec in recs:
            assert rec.status == "pass"
            assert rec.worst_slack >= -1e-10
    _stamp(start, "criterion 08 (negative-regret dichotomy)", 5.0)


# -- criterion 6: hypergradient variant global bounds ------------------------


def test_criterion_06_hyper_global_bounds():
    start = time.time()
    # strongly convex built-ins: never slower than the plain descent rate
    for problem, x1 in (
        (make_tridiagonal(50), np.ones(50)),
        (make_random_quadratic(20, cond=30.0, seed=3), np.random.default_rng(4).standard_normal(20)),
        (make_piecewise_quadratic(), np.array([-2.0, 1.0])),
    ):
        config = SolverConfig(
            x1=x1,
            feedback="hypergradient",
            action="monotone_lookahead",
            pattern="full",
            max_iters=1500,
            stop_gap=0.0,
            monitors_enabled=True,
        )
        trace, report = run_osgm(problem, config)
        rec = [r for r in report.records if r.name == "gd_rate_bound"][0]
        assert rec.status == "pass", problem.name
        gaps = np.concatenate([trace.f_gap, [trace.final_gap]])
        rate = math.log1p(-1.0 / problem.kappa)
        for K in range(1, len(trace) + 1):
            if gaps[K] <= 0:
                break
            assert math.log(gaps[K]) - math.log(gaps[0]) <= K * rate + 1e-9 * K
    # convex branch: paired-label logistic with scaled columns, reg = 0
    n = 5
    scales = np.arange(1.0, n + 1.0)
    A = np.vstack([np.diag(scales), np.diag(scales)])
    y = np.concatenate([np.ones(n), -np.ones(n)])
    logistic = make_logistic(A, y, reg=0.0)
    assert logistic.strong_convexity == 0.0
    x1 = np.full(n, 3.0)
    f1 = logistic.value(x1)
    # f >= (min scale / 2m) ||x||_1, so the f(x1)-sublevel set sits inside
    # the l1 ball of radius 2 m f(x1) / min(scales)
    delta = 2.0 * len(y) * f1 / scales.min()
    radius = sublevel_radius(logistic, x1, bound=delta)
    assert not radius.is_exact
    config = SolverConfig(
        x1=x1,
        feedback="hypergradient",
        action="monotone_lookahead",
        pattern="diag",
        max_iters=600,
        stop_gap=1e-12,
        monitors_enabled=True,
        delta_bound=radius.value,
    )
    trace, report = run_osgm(logistic, config)
    rec = [r for r in report.records if r.name == "gd_rate_bound"][0]
    assert rec.status == "pass"
    L = logistic.smoothness
    gaps = np.concatenate([trace.f_gap, [trace.final_gap]])
    for K in range(1, len(trace) + 1):
        if gaps[K] <= 0:
            break
        bound = min(2.0 * L * radius.value**2 / K, gaps[0])
        assert gaps[K] <= bound * (1.0 + 1e-9)
    _stamp(start, "criterion 06 (hypergradient global bounds)", 60.0)


# -- criterion 7: superlinear convergence on quadratics ----------------------


def test_criterion_07_superlinear_quadratics():
    start = time.time()
    for n in (5, 20):
        problem = make_random_quadratic(n, cond=8.0, seed=n)
        # start along the flattest direction so the plain-descent rate is
        # genuinely slow and the crossover requires stepsize learning
        _, Q = np.linalg.eigh(problem.hessian_at_opt)
        x1 = problem.opt_point + 3.0 * Q[:, 0]
        L = problem.smoothness
        hess_inv = hessian_inverse_stepsize(problem, "full")
        p1 = sz.scaled_identity(1.0 / L, n, "full")
        C = L * L * sz.distance(p1, hess_inv) ** 2
        config = SolverConfig(
            x1=x1,
            feedback="ratio",
            action="lookahead",
            pattern="full",
            max_iters=math.ceil(4 * C) + 10,
            stop_gap=0.0,
            monitors_enabled=True,
        )
        trace, report = run_osgm(problem, config)
        env = [r for r in report.records if r.name == "superlinear_envelope"][0]
        assert env.status == "pass"
        assert env.worst_slack >= -1e-9
        # independent log-space evaluation of the envelope
        gaps = np.concatenate([trace.f_gap, [trace.final_gap]])
        for K in range(1, len(trace) + 1):
            if gaps[K] <= 0:
                break
            lhs = math.log(gaps[K]) - math.log(gaps[0])
            assert lhs <= K * (math.log(C) - math.log(K)) + 1e-9 * K
        # measured contraction drops below (1 - 1/kappa)/2 before 4C steps,
        # starting from a per-step rate well above the threshold
        threshold = (1.0 - 1.0 / problem.kappa) / 2.0
        assert trace.progress[0] > threshold
        crossover = next(
            (int(k) for k, r in zip(trace.k, trace.progress) if r < threshold), None
        )
        assert crossover is not None and crossover <= math.ceil(4 * C)
    _stamp(start, "criterion 07 (superlinear envelope, n in {5, 20})", 60.0)


# -- criterion 9: swapped-update equivalence ---------------------------------


def test_criterion_09_hdm_equivalence():
    start = time.time()
    problem = make_random_quadratic(10, cond=20.0, seed=42)
    x1 = np.random.default_rng(43).standard_normal(10)
    assert hdm_lookahead_iterate_gap(problem, x1, 100) <= 1e-12
    _stamp(start, "criterion 09 (swapped-update equivalence)", 5.0)


# -- criterion 10: sqrt-schedule variants -------------------------------------


def test_criterion_10_sqrt_schedule_bounds():
    start = time.time()
    problem = make_tridiagonal(50)
    x1 = np.ones(50)
    box = sz.box(0.0, 2.0 / problem.smoothness)
    for feedback, action in (("ratio", "vanilla"), ("hypergradient", "monotone")):
        config = SolverConfig(
            x1=x1,
            feedback=feedback,
            action=action,
            pattern="diag",
            candidate_set=box,
            max_iters=2000,
            stop_gap=0.0,
            monitors_enabled=True,
            unsafe=True,
        )
        trace, report = run_osgm(problem, config)
        recs = _records(report, "global_rate")
        assert recs, (feedback, action)
        for rec in recs:
            assert rec.status == "pass", (feedback, action, rec.name)
            assert rec.worst_slack >= -1e-9
    _stamp(start, "criterion 10 (sqrt-schedule variant bounds, K <= 2000)", 30.0)


# -- criterion 11: eigenvalue structure and the orientation effect -----------


def test_criterion_11_orientation_effect():
    start = time.time()
    n = 50
    tri = make_tridiagonal(n)
    dense = np.linalg.eigvalsh(tri.hessian_at_opt)
    formula = tridiagonal_eigenvalues(n)
    assert np.max(np.abs(dense - formula)) < 1e-10
    assert abs(tri.smoothness - formula[-1]) < 1e-10
    assert abs(tri.strong_convexity - formula[0]) < 1e-10
    twin = make_quadratic(np.diag(formula), np.zeros(n))
    assert twin.kappa_star_diag == 1.0
    assert tri.kappa_star_diag == pytest.approx(tri.kappa)
    x1 = np.ones(n)
    iters = {}
    for problem, name in ((twin, "diagonal_twin"), (tri, "tridiagonal")):
        config = SolverConfig(
            x1=x1,
            feedback="ratio",
            action="lookahead",
            pattern="diag",
            max_iters=40000,
            stop_gap=1e-8,
        )
        trace, _ = run_osgm(problem, config)
        assert trace.status == "converged", name
        iters[name] = len(trace)
    assert iters["diagonal_twin"] < iters["tridiagonal"]
    _stamp(start, "criterion 11 (orientation effect on diagonal scalings)", 30.0)


# -- criterion 12: determinism and trace round-trip ---------------------------


def test_criterion_12_determinism_and_round_trip(tmp_path):
    start = time.time()
    problem = make_tridiagonal(25)
    config = SolverConfig(x1=np.ones(25), max_iters=200, seed=11, monitors_enabled=False)
    t1, _ = run_osgm(problem, config)
    t2, _ = run_osgm(problem, config)
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    t1.to_csv(str(p1))
    t2.to_csv(str(p2))
    assert p1.read_bytes() == p2.read_bytes()
    assert SolverTrace.from_csv(str(p1)).equals(t1)
    _stamp(start, "criterion 12 (determinism and trace round-trip)", 10.0)
