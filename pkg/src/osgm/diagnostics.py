"""Potential functions, bound monitors, and the invariant ledger.

Every convergence guarantee the solver relies on is checkable at runtime
from measured quantities.  A :class:`RunMonitor` rides along a solver run,
accumulating benchmark feedback and distances, and produces a
:class:`MonitorReport`: one record per inequality family with the worst
slack observed.  Monitors are side-effect free with respect to the solver:
they query the objective through their own handle and never touch solver
state, so traces are identical with monitoring on or off.

Rate-style bounds are evaluated in log space (log of the suboptimality gap
against K times the log contraction factor) so superlinear runs can be
checked long after the raw gap would underflow.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import stepsize as sz
from .feedback import FeedbackSample, feedback_constants
from .learners import RegretTracker, Schedule
from .problems import Problem, piecewise_region_hessian_inverse
from .stepsize import CandidateSet, Stepsize, scaled_identity

SLACK_TOL = 1e-10       # per-step inequality slack
LOG_RATE_TOL = 1e-9     # per-K slack in log space, normalized by K
POTENTIAL_TOL = 1e-9    # per-step potential decrease slack
EQUALITY_TOL = 1e-14    # exact identities


@dataclass
class CheckRecord:
    """Outcome of one monitored inequality family."""

    name: str
    checked: int
    worst_slack: float
    tolerance: float
    status: str  # "pass" | "fail" | "skipped"
    note: str = ""

    @classmethod
    def from_slack(cls, name, checked, worst_slack, tolerance, note=""):
        if checked == 0:
            return cls(name, 0, math.inf, tolerance, "skipped", note or "no data")
        status = "pass" if worst_slack >= -tolerance else "fail"
        return cls(name, checked, worst_slack, tolerance, status, note)

    @classmethod
    def skipped(cls, name, note):
        return cls(name, 0, math.inf, 0.0, "skipped", note)

    @property
    def passed(self) -> bool:
        return self.status != "fail"


@dataclass
class MonitorReport:
    """Pass/fail ledger of every inequality checked during a run."""

    records: list
    enabled: bool = True

    def add(self, record: CheckRecord):
        self.records.append(record)

    def extend(self, records):
        self.records.extend(records)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    def failures(self):
        return [r for r in self.records if not r.passed]

    def filter(self, substring: str) -> "MonitorReport":
        return MonitorReport(
            [r for r in self.records if substring in r.name], enabled=self.enabled
        )

    def to_json(self) -> str:
        return json.dumps(
            [
                {
                    "name": r.name,
                    "checked": r.checked,
                    "worst_slack": None if math.isinf(r.worst_slack) else r.worst_slack,
                    "pass": r.passed,
                    "status": r.status,
                    "note": r.note,
                }
                for r in self.records
            ],
            indent=2,
        )


def summarize(report: MonitorReport) -> str:
    """Human-readable pass/fail table."""
    if not report.enabled or not report.records:
        return "no checks run"
    width = max(len(r.name) for r in report.records) + 2
    lines = [f"{'check':<{width}}{'points':>8}  {'worst slack':>13}  status"]
    for r in report.records:
        slack = "" if math.isinf(r.worst_slack) else f"{r.worst_slack: .3e}"
        lines.append(f"{r.name:<{width}}{r.checked:>8}  {slack:>13}  {r.status}")
    n_fail = len(report.failures())
    lines.append(f"{len(report.records)} checks, {n_fail} failed")
    return "\n".join(lines)


@dataclass(frozen=True)
class PotentialSpec:
    """A joint potential in (x, P).

    ``phi_r`` and ``phi_h``: rho * log(f(x) - f*) + dist(P, benchmark)^2;
    ``omega_h``: -rho / (f(x) - f*) + dist(P, benchmark)^2.
    """

    kind: str  # "phi_r" | "phi_h" | "omega_h"
    rho: float
    benchmark: Stepsize
    expected_decrease: float = 0.0


def eval_potential(spec: PotentialSpec, x, P: Stepsize, problem: Problem) -> float:
    if problem.opt_value is None:
        raise ValueError("potential needs the problem's optimal value")
    gap = problem.value(np.asarray(x, dtype=float)) - problem.opt_value
    if gap <= 0:
        raise ValueError("potential not evaluable past convergence")
    return potential_from_gap(spec, gap, sz.distance(P, spec.benchmark) ** 2)


def potential_from_gap(spec: PotentialSpec, gap: float, dist_sq: float) -> float:
    if gap <= 0:
        return -math.inf
    if spec.kind in ("phi_r", "phi_h"):
        return spec.rho * math.log(gap) + dist_sq
    if spec.kind == "omega_h":
        return -spec.rho / gap + dist_sq
    raise ValueError(f"unknown potential kind {spec.kind!r}")


def action_progress_record(
    action: str,
    sample: FeedbackSample,
    f_next: float,
    f_x: float,
    problem: Problem,
) -> CheckRecord:
    """Check the feedback-to-progress inequality of one landscape action.

    Vanilla actions give exact equality between progress and feedback;
    monotone actions cap the progress at 1 (ratio) or 0 (hypergradient);
    lookahead actions improve the feedback by a squared-gradient term.
    """
    L = problem.smoothness
    gsq = sample.gradient_frobenius_norm() ** 2
    if sample.kind == "ratio":
        progress = (f_next - problem.opt_value) / sample.denom
        bonus = gsq / (4.0 * L * L)
        cap = 1.0
    else:
        progress = (f_next - f_x) / sample.denom
        bonus = gsq / (2.0 * L)
        cap = 0.0
    name = f"action_progress[{action},{sample.kind}]"
    if action == "vanilla":
        slack = -abs(progress - sample.value)
        return CheckRecord.from_slack(name, 1, slack, EQUALITY_TOL)
    if action == "monotone":
        rhs = min(sample.value, cap)
    elif action == "lookahead":
        rhs = sample.value - bonus
    elif action == "monotone_lookahead":
        rhs = min(sample.value - bonus, cap)
    else:
        raise ValueError(f"unknown action {action!r}")
    return CheckRecord.from_slack(name, 1, rhs - progress, SLACK_TOL)


def kappa_for_benchmark(problem: Problem, bench: Stepsize) -> Optional[float]:
    """Condition-number certificate kappa_B for a benchmark stepsize.

    Returns a value kappa_B such that the ratio feedback of the benchmark
    is at most 1 - 1/kappa_B at every point, or None when no certificate
    is available.  The scaled identity (1/L) I certifies kappa = L/mu for
    any strongly convex problem; for quadratics, any symmetric benchmark
    with spectrum of P^(1/2) A P^(1/2) inside (0, 1] certifies the inverse
    of its smallest eigenvalue (1 for the exact inverse Hessian).
    """
    L = problem.smoothness
    inv_l = scaled_identity(1.0 / L, bench.dim, bench.pattern)
    if sz.distance(bench, inv_l) <= 1e-12 * (1.0 + 1.0 / L):
        return problem.kappa
    A = problem.hessian_at_opt
    if A is None or problem.hessian_lipschitz not in (0, 0.0):
        return None
    P = bench.as_matrix()
    if np.max(np.abs(P - P.T)) > 1e-12 * max(1.0, np.max(np.abs(P))):
        return None
    eigs_a, Q = np.linalg.eigh(A)
    root = Q @ (np.sqrt(eigs_a)[:, None] * Q.T)
    spectrum = np.linalg.eigvalsh(root @ P @ root)
    if spectrum[0] <= 0 or spectrum[-1] > 1.0 + 1e-10:
        return None
    return float(1.0 / spectrum[0])


def hessian_inverse_stepsize(problem: Problem, pattern: str) -> Optional[Stepsize]:
    """The inverse Hessian at the optimum expressed in a pattern, if exact."""
    A = problem.hessian_at_opt
    if A is None:
        return None
    n = problem.dim
    diag = np.diag(A)
    off = A - np.diag(diag)
    is_diagonal = np.count_nonzero(off) == 0
    if pattern == "full":
        return sz.full_stepsize(np.linalg.inv(A))
    if pattern == "diag" and is_diagonal:
        return sz.diag_stepsize(1.0 / diag)
    if pattern == "scalar" and is_diagonal and np.allclose(diag, diag[0]):
        return sz.scalar_stepsize(1.0 / diag[0], n)
    return None


def default_benchmarks(
    problem: Problem,
    pattern: str,
    p1: Stepsize,
    candidate_set: CandidateSet,
) -> tuple[dict, dict]:
    """Benchmark stepsizes the monitors compare against by default.

    Returns (benchmarks, notes): the initial stepsize, the scaled identity
    (1/L) I, and the inverse Hessian at the optimum when it is
    representable in the pattern.  Benchmarks outside the candidate set
    are dropped with a note, since the regret hypotheses would not hold.
    """
    benches = {"initial_stepsize": p1}
    notes = {}
    inv_l = scaled_identity(1.0 / problem.smoothness, problem.dim, pattern)
    if candidate_set.contains(inv_l):
        benches["inv_smoothness"] = inv_l
    else:
        notes["inv_smoothness"] = "outside candidate set; bound hypotheses violated"
    hess_inv = hessian_inverse_stepsize(problem, pattern)
    if hess_inv is not None:
        if candidate_set.contains(hess_inv):
            benches["hessian_inverse"] = hess_inv
        else:
            notes["hessian_inverse"] = "outside candidate set; bound hypotheses violated"
    return benches, notes


def piecewise_region_benchmark(pattern: str = "diag") -> Callable[[np.ndarray], Stepsize]:
    """Region-switching benchmark sequence for the piecewise quadratic:
    the inverse Hessian of whichever region the iterate is in."""

    def fn(x: np.ndarray) -> Stepsize:
        d = piecewise_region_hessian_inverse(x)
        if pattern == "full":
            return sz.full_stepsize(np.diag(d))
        return sz.diag_stepsize(d)

    return fn


@dataclass
class MonitorContext:
    """What the monitor needs to know about the run it is watching."""

    problem: Problem
    feedback: str
    action: str
    pattern: str
    candidate_set: CandidateSet
    p1: Stepsize
    schedule: Schedule
    learner: str = "ogd"
    delta_bound: Optional[float] = None


class RunMonitor:
    """Per-run accumulator for every theorem-derived inequality.

    The solver calls :meth:`observe` once per iteration and
    :meth:`finalize` once at termination; :meth:`report` assembles the
    ledger.  All oracle queries made here go through the monitor's own
    problem handle and are not charged to the solver's oracle accounting.
    """

    def __init__(
        self,
        context: MonitorContext,
        enabled: bool = True,
        extra_benchmarks: Optional[dict] = None,
        sequences: Optional[dict] = None,
    ):
        self.ctx = context
        self.enabled = enabled
        problem = context.problem
        self.has_gap = problem.opt_value is not None
        self.benchmarks, self.skip_notes = default_benchmarks(
            problem, context.pattern, context.p1, context.candidate_set
        )
        for name, bench in (extra_benchmarks or {}).items():
            if context.candidate_set.contains(bench):
                self.benchmarks[name] = bench
            else:
                self.skip_notes[name] = "outside candidate set; bound hypotheses violated"
        self.sequence_fns = dict(sequences or {})
        constant_eta = (
            context.schedule.eta(1) if context.schedule.kind == "constant" else None
        )
        self.tracker = RegretTracker(context.p1, constant_eta=constant_eta)
        for name, bench in self.benchmarks.items():
            self.tracker.register_benchmark(name, bench)
        for name in self.sequence_fns:
            self.tracker.register_sequence(name)
        # per-iteration scalars
        self.gaps: list = []
        self.grad_norms: list = []
        self.feedback_values: list = []
        self.progress: list = []
        self.etas: list = []
        self.full_grad_sq: list = []
        self.x_dist_sq: list = []
        self.drift_prefix_max: list = []
        self.seq_dist_p1_sq: dict = {name: [] for name in self.sequence_fns}
        self.seq_path_prefix: dict = {name: [] for name in self.sequence_fns}
        self.action_records: dict = {}
        self.final_gap: Optional[float] = None
        self.final_grad_norm: Optional[float] = None
        self.status = "unknown"
        self.delta: Optional[float] = None

    # -- accumulation ----------------------------------------------------

    def observe(
        self,
        k: int,
        x: np.ndarray,
        fx: float,
        gap: Optional[float],
        gx: np.ndarray,
        grad_norm: float,
        sample: FeedbackSample,
        f_next: float,
        progress: float,
        p_before: Stepsize,
        p_after: Stepsize,
        eta: float,
        grad_native_sq: float,
    ):
        if not self.enabled:
            return
        problem = self.ctx.problem
        if k == 1 and gap is not None:
            mu = problem.strong_convexity
            if mu > 0:
                self.delta = math.sqrt(2.0 * max(gap, 0.0) / mu)
            elif self.ctx.delta_bound is not None:
                self.delta = float(self.ctx.delta_bound)
        self.gaps.append(math.inf if gap is None else gap)
        self.grad_norms.append(grad_norm)
        self.feedback_values.append(sample.value)
        self.progress.append(progress)
        self.etas.append(eta)
        self.full_grad_sq.append(sample.gradient_frobenius_norm() ** 2)
        if problem.opt_point is not None:
            d = x - problem.opt_point
            self.x_dist_sq.append(float(d @ d))
        bench_values = {
            name: self._feedback_at(bench, x, fx, gap, gx, grad_norm)
            for name, bench in self.benchmarks.items()
        }
        seq_values = {}
        for name, fn in self.sequence_fns.items():
            bench_k = fn(x)
            seq_values[name] = (
                bench_k,
                self._feedback_at(bench_k, x, fx, gap, gx, grad_norm),
            )
        self.tracker.update(
            sample,
            p_before=p_before,
            p_after=p_after,
            eta=eta,
            grad_native_sq=grad_native_sq,
            benchmark_values=bench_values,
            sequence_values=seq_values,
        )
        self.drift_prefix_max.append(self.tracker.max_drift)
        for name in self.sequence_fns:
            track = self.tracker.sequences[name]
            self.seq_dist_p1_sq[name].append(track.dist_p1_sq_last)
            self.seq_path_prefix[name].append(track.path_length)
        record = action_progress_record(self.ctx.action, sample, f_next, fx, problem)
        prev = self.action_records.get(record.name)
        if prev is None:
            self.action_records[record.name] = record
        else:
            prev.checked += 1
            prev.worst_slack = min(prev.worst_slack, record.worst_slack)
            if record.status == "fail":
                prev.status = "fail"

    def _feedback_at(self, bench, x, fx, gap, gx, grad_norm):
        f_hat = self.ctx.problem.value(x - bench.apply(gx))
        if self.ctx.feedback == "ratio":
            return (f_hat - self.ctx.problem.opt_value) / gap
        return (f_hat - fx) / (grad_norm * grad_norm)

    def finalize(self, final_gap, final_grad_norm, status: str):
        if not self.enabled:
            return
        self.final_gap = final_gap
        self.final_grad_norm = final_grad_norm
        self.status = status

    # -- reporting helpers ------------------------------------------------

    def gap_after(self, K: int) -> float:
        """Gap at the iterate produced after K completed iterations."""
        if K < len(self.gaps):
            return self.gaps[K]
        return self.final_gap if self.final_gap is not None else math.inf

    @property
    def steps(self) -> int:
        return len(self.feedback_values)

    def is_constant_eta(self, target: Optional[float] = None) -> bool:
        if self.ctx.schedule.kind != "constant":
            return False
        if target is None:
            return True
        eta = self.ctx.schedule.eta(1)
        return abs(eta - target) <= 1e-12 * max(eta, target)

    def report(self) -> MonitorReport:
        if not self.enabled:
            return MonitorReport([], enabled=False)
        report = MonitorReport([])
        for rec in self.action_records.values():
            report.add(rec)
        if self.ctx.learner == "ogd":
            report.extend(per_step_learner_records(self))
            report.extend(check_global_bounds(self))
            report.extend(check_local_bounds(self))
        else:
            # only learner-independent facts survive: the blackbox
            # reductions and the pointwise benchmark feedback bound
            if self.has_gap and self.steps > 0:
                if self.ctx.feedback == "ratio" or self.ctx.action in (
                    "monotone",
                    "monotone_lookahead",
                ):
                    report.extend(_reduction_records(self))
                rec = _local_hessian_record(self)
                if rec is not None:
                    report.add(rec)
            report.add(
                CheckRecord.skipped(
                    "learner_bounds",
                    "regret and rate certificates are stated for the plain "
                    "online-gradient learner",
                )
            )
        for name, note in self.skip_notes.items():
            report.add(CheckRecord.skipped(f"benchmark[{name}]", note))
        return report


# -- per-step learner inequalities ----------------------------------------


def per_step_learner_records(mon: RunMonitor) -> list:
    """Per-step descent inequality, static regret, and dynamic regret."""
    records = []
    tr = mon.tracker
    for name, track in tr.benchmarks.items():
        records.append(
            CheckRecord.from_slack(
                f"ogd_step[{name}]", track.steps, track.per_step_worst, SLACK_TOL
            )
        )
        records.append(
            CheckRecord.from_slack(
                f"static_regret[{name}]", track.steps, track.static_worst, SLACK_TOL
            )
        )
    for name, track in tr.sequences.items():
        if tr.constant_eta is None:
            records.append(
                CheckRecord.skipped(
                    f"dynamic_regret[{name}]", "stated for constant learning rates"
                )
            )
        else:
            records.append(
                CheckRecord.from_slack(
                    f"dynamic_regret[{name}]",
                    len(track.values),
                    track.dynamic_worst,
                    SLACK_TOL,
                )
            )
    records.extend(_sqrt_regret_records(mon))
    return records


def _sqrt_regret_records(mon: RunMonitor) -> list:
    """Regret bounded by (D^2/2c + c sigma^2) sqrt(K) on bounded sets
    under the 1/sqrt schedules, using the feedback Lipschitz constants."""
    ctx = mon.ctx
    if ctx.schedule.kind not in ("horizon_sqrt", "anytime_sqrt"):
        return []
    if ctx.pattern == "scalar":
        return []  # the Lipschitz constants bound the matrix-space gradient
    D = ctx.candidate_set.diam(ctx.pattern, ctx.problem.dim)
    if D is None or mon.steps == 0:
        return []
    consts = feedback_constants(ctx.problem, set_diam=D)
    sigma = (
        consts.ratio_lipschitz if ctx.feedback == "ratio" else consts.hyper_lipschitz
    )
    c = ctx.schedule.base
    coef = D * D / (2.0 * c) + c * sigma * sigma
    lhs_prefix = np.cumsum(mon.feedback_values)
    records = []
    for name, track in mon.tracker.benchmarks.items():
        rhs_prefix = np.cumsum(track.values)
        worst = math.inf
        for K in range(1, mon.steps + 1):
            worst = min(
                worst,
                rhs_prefix[K - 1] + coef * math.sqrt(K) - lhs_prefix[K - 1],
            )
        records.append(
            CheckRecord.from_slack(f"sqrt_regret[{name}]", mon.steps, worst, SLACK_TOL)
        )
    return records


# -- rate bound helpers -----------------------------------------------------


def _log_gap_ratio(mon: RunMonitor, K: int) -> float:
    """log(gap(K+1)) - log(gap(1)); -inf once the gap reaches zero."""
    g_end = mon.gap_after(K)
    g_one = mon.gaps[0]
    if g_end <= 0:
        return -math.inf
    return math.log(g_end) - math.log(g_one)


def _rate_bound_slacks(mon: RunMonitor, log_rate_at):
    """Worst normalized slack of lhs_K <= K * log_rate_K over all K."""
    worst = math.inf
    checked = 0
    for K in range(1, mon.steps + 1):
        log_rate = log_rate_at(K)
        if log_rate is None:
            continue
        lhs = _log_gap_ratio(mon, K)
        checked += 1
        if lhs == -math.inf:
            continue
        if math.isinf(log_rate):
            continue  # unbounded rate: trivially satisfied
        worst = min(worst, (K * log_rate - lhs) / K)
    return checked, worst


def _safe_log(v: float) -> float:
    if v <= 0:
        return -math.inf
    return math.log(v)


# -- global bounds ----------------------------------------------------------


def check_global_bounds(mon: RunMonitor) -> list:
    """Worst-case convergence bounds of the running variant, per benchmark."""
    records = []
    if not mon.has_gap or mon.steps == 0:
        return [CheckRecord.skipped("global_rate", "needs the optimal value")]
    ctx = mon.ctx
    problem = ctx.problem
    L = problem.smoothness
    mu = problem.strong_convexity
    lookahead = ctx.action in ("lookahead", "monotone_lookahead")

    if ctx.feedback == "ratio":
        if lookahead and mon.is_constant_eta(1.0 / (2.0 * L * L)):
            records.extend(_ratio_lookahead_global(mon))
        elif not lookahead and ctx.schedule.kind in ("horizon_sqrt", "anytime_sqrt"):
            records.extend(_ratio_sqrt_global(mon))
        records.extend(_reduction_records(mon))
    else:
        if lookahead and mon.is_constant_eta(1.0 / L):
            records.extend(_hyper_lookahead_global(mon))
        elif not lookahead and ctx.schedule.kind in ("horizon_sqrt", "anytime_sqrt"):
            records.extend(_hyper_sqrt_global(mon))
        if ctx.action in ("monotone", "monotone_lookahead"):
            records.extend(_reduction_records(mon))
    records.extend(_negative_regret_records(mon))
    return records


def _ratio_lookahead_global(mon: RunMonitor) -> list:
    problem = mon.ctx.problem
    L = problem.smoothness
    records = []
    for name, track in mon.tracker.benchmarks.items():
        prefix = np.cumsum(track.values)
        dist0_sq = track.dist_sq[0]

        def log_rate(K, prefix=prefix, dist0_sq=dist0_sq):
            return _safe_log((prefix[K - 1] + L * L * dist0_sq) / K)

        checked, worst = _rate_bound_slacks(mon, log_rate)
        records.append(
            CheckRecord.from_slack(
                f"global_rate[{name}]", checked, worst, LOG_RATE_TOL
            )
        )
    records.append(_best_of_two_record(mon))
    return records


def _best_of_two_record(mon: RunMonitor) -> CheckRecord:
    """Minimum of the plain-descent rate and the optimally-scaled rate."""
    problem = mon.ctx.problem
    L = problem.smoothness
    name = "best_of_two_rate"
    inv_l = scaled_identity(1.0 / L, problem.dim, mon.ctx.pattern)
    if sz.distance(mon.ctx.p1, inv_l) > 1e-12 * (1.0 + 1.0 / L):
        return CheckRecord.skipped(name, "needs initial stepsize (1/L) I")
    branch1 = None
    if problem.kappa is not None:
        branch1 = math.log1p(-1.0 / problem.kappa)
    hess_inv = hessian_inverse_stepsize(problem, mon.ctx.pattern)
    C = None
    if hess_inv is not None and problem.hessian_lipschitz == 0.0:
        C = L * L * sz.distance(mon.ctx.p1, hess_inv) ** 2
    if branch1 is None and C is None:
        return CheckRecord.skipped(name, "no rate certificate available")

    def log_rate(K):
        candidates = []
        if branch1 is not None:
            candidates.append(branch1)
        if C is not None:
            candidates.append(_safe_log(C / K))  # optimal conditioning is exact here
        return min(candidates)

    checked, worst = _rate_bound_slacks(mon, log_rate)
    return CheckRecord.from_slack(name, checked, worst, LOG_RATE_TOL)


def _ratio_sqrt_global(mon: RunMonitor) -> list:
    problem = mon.ctx.problem
    L = problem.smoothness
    D = mon.ctx.candidate_set.diam(mon.ctx.pattern, problem.dim)
    if D is None:
        return [CheckRecord.skipped("global_rate", "needs a bounded candidate set")]
    base = D / (2.0 * L * (L * D + 1.0))
    if abs(mon.ctx.schedule.base - base) > 1e-9 * base:
        return [
            CheckRecord.skipped(
                "global_rate", "learning rate differs from the analyzed schedule"
            )
        ]
    term = 3.0 * L * D * (L * D + 1.0)
    records = []
    for name, track in mon.tracker.benchmarks.items():
        prefix = np.cumsum(track.values)

        def log_rate(K, prefix=prefix):
            return _safe_log(prefix[K - 1] / K + term / math.sqrt(K))

        checked, worst = _rate_bound_slacks(mon, log_rate)
        records.append(
            CheckRecord.from_slack(
                f"global_rate[{name}]", checked, worst, LOG_RATE_TOL
            )
        )
    return records


def _hyper_lookahead_global(mon: RunMonitor) -> list:
    problem = mon.ctx.problem
    L = problem.smoothness
    mu = problem.strong_convexity
    records = []
    for name, track in mon.tracker.benchmarks.items():
        prefix = np.cumsum(track.values)
        dist0_sq = track.dist_sq[0]
        if mu > 0:

            def log_rate(K, prefix=prefix, dist0_sq=dist0_sq):
                m = max(-prefix[K - 1] / K - L * dist0_sq / (2.0 * K), 0.0)
                return _safe_log(1.0 - 2.0 * mu * m)

            checked, worst = _rate_bound_slacks(mon, log_rate)
            records.append(
                CheckRecord.from_slack(
                    f"global_rate[{name}]", checked, worst, LOG_RATE_TOL
                )
            )
        if mon.delta is not None:
            checked, worst = _hyper_convex_slacks(
                mon,
                lambda K, prefix=prefix, dist0_sq=dist0_sq: max(
                    -prefix[K - 1] / K - L * dist0_sq / (2.0 * K), 0.0
                ),
            )
            records.append(
                CheckRecord.from_slack(
                    f"convex_rate[{name}]", checked, worst, LOG_RATE_TOL
                )
            )
    records.append(_hyper_gd_rate_record(mon))
    return records


def _hyper_convex_slacks(mon: RunMonitor, mean_progress_at):
    """gap(K+1) <= min(Delta^2 / (K m_K), gap(1)), checked in log space."""
    delta = mon.delta
    worst = math.inf
    checked = 0
    for K in range(1, mon.steps + 1):
        m = mean_progress_at(K)
        bound = mon.gaps[0]
        if m > 0:
            bound = min(bound, delta * delta / (K * m))
        lhs = mon.gap_after(K)
        checked += 1
        if lhs <= 0:
            continue
        worst = min(worst, (_safe_log(bound) - _safe_log(lhs)) / max(K, 1))
    return checked, worst


def _hyper_gd_rate_record(mon: RunMonitor) -> CheckRecord:
    problem = mon.ctx.problem
    L = problem.smoothness
    mu = problem.strong_convexity
    name = "gd_rate_bound"
    inv_l = scaled_identity(1.0 / L, problem.dim, mon.ctx.pattern)
    if sz.distance(mon.ctx.p1, inv_l) > 1e-12 * (1.0 + 1.0 / L):
        return CheckRecord.skipped(name, "needs initial stepsize (1/L) I")
    if mu > 0:
        rate = math.log1p(-1.0 / problem.kappa)
        checked, worst = _rate_bound_slacks(mon, lambda K: rate)
        return CheckRecord.from_slack(name, checked, worst, LOG_RATE_TOL)
    if mon.delta is None:
        return CheckRecord.skipped(name, "needs strong convexity or a sublevel radius")
    delta = mon.delta
    worst = math.inf
    checked = 0
    for K in range(1, mon.steps + 1):
        bound = min(2.0 * L * delta * delta / K, mon.gaps[0])
        lhs = mon.gap_after(K)
        checked += 1
        if lhs <= 0:
            continue
        worst = min(worst, (_safe_log(bound) - _safe_log(lhs)) / max(K, 1))
    return CheckRecord.from_slack(name, checked, worst, LOG_RATE_TOL)


def _hyper_sqrt_global(mon: RunMonitor) -> list:
    problem = mon.ctx.problem
    L = problem.smoothness
    mu = problem.strong_convexity
    D = mon.ctx.candidate_set.diam(mon.ctx.pattern, problem.dim)
    if D is None:
        return [CheckRecord.skipped("global_rate", "needs a bounded candidate set")]
    base = D / (L * D + 1.0)
    if abs(mon.ctx.schedule.base - base) > 1e-9 * base:
        return [
            CheckRecord.skipped(
                "global_rate", "learning rate differs from the analyzed schedule"
            )
        ]
    term = 3.0 * D * (L * D + 1.0)
    records = []
    for name, track in mon.tracker.benchmarks.items():
        prefix = np.cumsum(track.values)

        def mean_progress(K, prefix=prefix):
            return max(-prefix[K - 1] / K - term / math.sqrt(K), 0.0)

        if mu > 0:

            def log_rate(K):
                return _safe_log(1.0 - 2.0 * mu * mean_progress(K))

            checked, worst = _rate_bound_slacks(mon, log_rate)
            records.append(
                CheckRecord.from_slack(
                    f"global_rate[{name}]", checked, worst, LOG_RATE_TOL
                )
            )
        if mon.delta is not None:
            checked, worst = _hyper_convex_slacks(mon, mean_progress)
            records.append(
                CheckRecord.from_slack(
                    f"convex_rate[{name}]", checked, worst, LOG_RATE_TOL
                )
            )
    return records


def _reduction_records(mon: RunMonitor) -> list:
    """Blackbox reductions from cumulative progress to suboptimality."""
    records = []
    problem = mon.ctx.problem
    progress = np.asarray(mon.progress)
    prefix = np.cumsum(progress)
    if mon.ctx.feedback == "ratio":
        with np.errstate(divide="ignore", invalid="ignore"):
            log_prefix = np.cumsum(np.log(np.maximum(progress, 0.0)))
        worst = math.inf
        checked = 0
        for K in range(1, mon.steps + 1):
            lhs = _log_gap_ratio(mon, K)
            sum_log = float(log_prefix[K - 1])
            checked += 1
            if lhs == -math.inf or sum_log == -math.inf:
                if not (lhs == -math.inf and sum_log == -math.inf):
                    worst = min(worst, -math.inf)
                continue
            worst = min(worst, 1e-10 * (1.0 + abs(lhs)) - abs(lhs - sum_log))
        records.append(
            CheckRecord.from_slack("reduction_product", checked, worst, 0.0)
        )

        def log_rate(K):
            return _safe_log(float(prefix[K - 1]) / K)

        checked, worst = _rate_bound_slacks(mon, log_rate)
        records.append(
            CheckRecord.from_slack("reduction_mean_power", checked, worst, LOG_RATE_TOL)
        )
    else:
        mu = problem.strong_convexity
        if mu > 0:

            def log_rate(K):
                return _safe_log(1.0 + 2.0 * mu * float(prefix[K - 1]) / K)

            checked, worst = _rate_bound_slacks(mon, log_rate)
            records.append(
                CheckRecord.from_slack(
                    "reduction_telescope", checked, worst, LOG_RATE_TOL
                )
            )
        if mon.delta is not None:
            checked, worst = _hyper_convex_slacks(
                mon, lambda K: -float(prefix[K - 1]) / K
            )
            records.append(
                CheckRecord.from_slack(
                    "reduction_telescope_convex", checked, worst, LOG_RATE_TOL
                )
            )
    return records


def _negative_regret_records(mon: RunMonitor) -> list:
    """At every K, the learner either beats the benchmark's cumulative
    feedback or satisfies an explicit superlinear bound."""
    problem = mon.ctx.problem
    mu = problem.strong_convexity
    records = []
    if mu <= 0 or mon.ctx.schedule.kind != "constant" or mon.steps == 0:
        return records
    eta = mon.ctx.schedule.eta(1)
    L = problem.smoothness
    kappa = problem.kappa
    grad1_sq = mon.grad_norms[0] ** 2
    lead = grad1_sq / (2.0 * mu)
    progress_prefix = np.cumsum(mon.progress)
    for name, track in mon.tracker.benchmarks.items():
        bench_prefix = np.cumsum(track.values)
        dist0_sq = track.dist_sq[0]
        if mon.ctx.feedback == "ratio":
            coef = kappa * kappa * dist0_sq / eta
        else:
            coef = 2.0 * L * dist0_sq / eta
        worst = math.inf
        for K in range(1, mon.steps + 1):
            slack1 = bench_prefix[K - 1] - progress_prefix[K - 1]
            lhs2 = mon.gap_after(K) - mon.gaps[0]
            if lhs2 <= 0:
                slack2 = math.inf
            elif coef <= 0:
                slack2 = -math.inf
            else:
                log_rhs = _safe_log(lead) + K * (math.log(coef) - math.log(K))
                slack2 = log_rhs - math.log(lhs2)
            worst = min(worst, max(slack1, slack2))
        records.append(
            CheckRecord.from_slack(
                f"negative_regret[{name}]", mon.steps, worst, SLACK_TOL
            )
        )
    return records


# -- local bounds -------------------------------------------------------------


def check_local_bounds(mon: RunMonitor) -> list:
    """Trajectory-adaptive bounds, local feedback of the inverse Hessian,
    superlinear envelopes, and potential decreases."""
    records = []
    if not mon.has_gap or mon.steps == 0:
        return records
    records.extend(_trajectory_records(mon))
    rec = _local_hessian_record(mon)
    if rec is not None:
        records.append(rec)
    rec = _superlinear_record(mon)
    if rec is not None:
        records.append(rec)
    records.extend(_potential_records(mon))
    return records


def _trajectory_records(mon: RunMonitor) -> list:
    problem = mon.ctx.problem
    L = problem.smoothness
    mu = problem.strong_convexity
    records = []
    lookahead = mon.ctx.action in ("lookahead", "monotone_lookahead")
    for name, track in mon.tracker.sequences.items():
        cname = f"trajectory_rate[{name}]"
        if not lookahead or mon.tracker.constant_eta is None:
            records.append(
                CheckRecord.skipped(cname, "stated for lookahead runs with constant rate")
            )
            continue
        prefix = np.cumsum(track.values)
        dist_sq = mon.seq_dist_p1_sq[name]
        path = mon.seq_path_prefix[name]
        drift = mon.drift_prefix_max
        if mon.ctx.feedback == "ratio":
            if not mon.is_constant_eta(1.0 / (2.0 * L * L)):
                records.append(CheckRecord.skipped(cname, "learning rate differs"))
                continue

            def log_rate(K):
                extra = dist_sq[K - 1] + 2.0 * drift[K - 1] * path[K - 1]
                return _safe_log(prefix[K - 1] / K + L * L * extra / K)

            checked, worst = _rate_bound_slacks(mon, log_rate)
            records.append(CheckRecord.from_slack(cname, checked, worst, LOG_RATE_TOL))
        else:
            if not mon.is_constant_eta(1.0 / L):
                records.append(CheckRecord.skipped(cname, "learning rate differs"))
                continue

            def mean_progress(K):
                rho = (
                    L
                    / (2.0 * K)
                    * (dist_sq[K - 1] + 2.0 * drift[K - 1] * path[K - 1])
                )
                return max(-prefix[K - 1] / K - rho, 0.0)

            if mu > 0:

                def log_rate(K):
                    return _safe_log(1.0 - 2.0 * mu * mean_progress(K))

                checked, worst = _rate_bound_slacks(mon, log_rate)
                records.append(
                    CheckRecord.from_slack(cname, checked, worst, LOG_RATE_TOL)
                )
            elif mon.delta is not None:
                checked, worst = _hyper_convex_slacks(mon, mean_progress)
                records.append(
                    CheckRecord.from_slack(cname, checked, worst, LOG_RATE_TOL)
                )
    return records


def _local_hessian_record(mon: RunMonitor) -> Optional[CheckRecord]:
    """Pointwise bound on the feedback of the inverse Hessian at the optimum."""
    problem = mon.ctx.problem
    name = "local_hessian_feedback"
    track = mon.tracker.benchmarks.get("hessian_inverse")
    H = problem.hessian_lipschitz
    mu = problem.strong_convexity
    if track is None or H is None or mu <= 0 or not mon.x_dist_sq:
        return None
    kappa = problem.kappa
    worst = math.inf
    if mon.ctx.feedback == "ratio":
        coef = H * H * kappa / (4.0 * mu * mu)
        for value, xd in zip(track.values, mon.x_dist_sq):
            worst = min(worst, coef * xd - value)
    else:
        coef = H * H * kappa / (8.0 * mu**3)
        for value, xd, gap, gn in zip(
            track.values, mon.x_dist_sq, mon.gaps, mon.grad_norms
        ):
            worst = min(worst, coef * xd - (value + gap / (gn * gn)))
    return CheckRecord.from_slack(name, len(track.values), worst, SLACK_TOL)


def _superlinear_record(mon: RunMonitor) -> Optional[CheckRecord]:
    """Envelope gap(K+1) <= gap(1) (C/K)^K from competing with the inverse
    Hessian, with the constant built from the Hessian Lipschitz modulus."""
    problem = mon.ctx.problem
    name = "superlinear_envelope"
    L = problem.smoothness
    mu = problem.strong_convexity
    H = problem.hessian_lipschitz
    if H is None or mu <= 0:
        return None
    hess_inv = hessian_inverse_stepsize(problem, mon.ctx.pattern)
    if hess_inv is None:
        return None
    inv_l = scaled_identity(1.0 / L, problem.dim, mon.ctx.pattern)
    if sz.distance(mon.ctx.p1, inv_l) > 1e-12 * (1.0 + 1.0 / L):
        return None
    lookahead = mon.ctx.action in ("lookahead", "monotone_lookahead")
    kappa = problem.kappa
    dist_sq = sz.distance(mon.ctx.p1, hess_inv) ** 2
    if mon.ctx.feedback == "ratio":
        if not (lookahead and mon.is_constant_eta(1.0 / (2.0 * L * L))):
            return None
        C = H * H * kappa**2 / (2.0 * mu**3) * mon.gaps[0] + L * L * dist_sq
    else:
        if not (
            mon.ctx.action == "monotone_lookahead" and mon.is_constant_eta(1.0 / L)
        ):
            return None
        C = H * H * kappa**3 / (2.0 * mu**3) * mon.gaps[0] + L * L * dist_sq
    if C <= 0:
        return None

    def log_rate(K):
        return math.log(C) - math.log(K)

    checked, worst = _rate_bound_slacks(mon, log_rate)
    return CheckRecord.from_slack(name, checked, worst, LOG_RATE_TOL, note=f"C={C:.6g}")


def _potential_records(mon: RunMonitor) -> list:
    """Per-iteration potential decreases."""
    problem = mon.ctx.problem
    L = problem.smoothness
    mu = problem.strong_convexity
    records = []
    lookahead = mon.ctx.action in ("lookahead", "monotone_lookahead")
    gaps = list(mon.gaps) + [mon.gap_after(mon.steps)]
    if mon.ctx.feedback == "ratio" and lookahead and mon.is_constant_eta(
        1.0 / (2.0 * L * L)
    ):
        rho = 1.0 / (L * L)
        for name, track in mon.tracker.benchmarks.items():
            kb = kappa_for_benchmark(problem, track.stepsize)
            cname = f"potential_log[{name}]"
            if kb is None:
                records.append(
                    CheckRecord.skipped(cname, "no conditioning certificate")
                )
                continue
            target = 1.0 / (kb * L * L)
            worst = math.inf
            for k in range(mon.steps):
                d_log = _safe_log(gaps[k + 1]) - _safe_log(gaps[k])
                decrease = rho * d_log + (track.dist_sq[k + 1] - track.dist_sq[k])
                worst = min(worst, -target - decrease)
            records.append(
                CheckRecord.from_slack(cname, mon.steps, worst, POTENTIAL_TOL)
            )
    if (
        mon.ctx.feedback == "hypergradient"
        and mon.ctx.action == "monotone_lookahead"
        and mon.is_constant_eta(1.0 / L)
    ):
        track = mon.tracker.benchmarks.get("inv_smoothness")
        if track is not None:
            target = 1.0 / (L * L)
            if mu > 0:
                rho = 1.0 / (L * mu)
                worst = math.inf
                for k in range(mon.steps):
                    d_log = _safe_log(gaps[k + 1]) - _safe_log(gaps[k])
                    decrease = rho * d_log + (track.dist_sq[k + 1] - track.dist_sq[k])
                    worst = min(worst, -target - decrease)
                records.append(
                    CheckRecord.from_slack(
                        "potential_log[inv_smoothness]", mon.steps, worst, POTENTIAL_TOL
                    )
                )
            if mon.delta is not None:
                rho = 2.0 * mon.delta**2 / L
                worst = math.inf
                for k in range(mon.steps):
                    if gaps[k] <= 0 or gaps[k + 1] <= 0:
                        continue
                    d_rec = -rho * (1.0 / gaps[k + 1] - 1.0 / gaps[k])
                    decrease = d_rec + (track.dist_sq[k + 1] - track.dist_sq[k])
                    worst = min(worst, -target - decrease)
                records.append(
                    CheckRecord.from_slack(
                        "potential_reciprocal", mon.steps, worst, POTENTIAL_TOL
                    )
                )
    return records
