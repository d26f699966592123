"""Online learners over feedback gradients and regret bookkeeping.

The scheduler updates the stepsize with projected online gradient descent
(or diagonal AdaGrad) on the per-iteration feedback functions.  A
:class:`RegretTracker` accumulates both sides of the per-step descent
inequality, the static regret bound, and the dynamic regret bound against
registered benchmark stepsizes and sequences, so runtime monitors can
assert the guarantees along a run.

All distances and gradient norms here live in the stepsize pattern's own
parameter space (see :mod:`osgm.stepsize`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from . import stepsize as sz
from .feedback import FeedbackSample
from .problems import Problem
from .stepsize import CandidateSet, Stepsize

ADAGRAD_EPS = 1e-12


@dataclass(frozen=True)
class Schedule:
    """Online learning rate schedule eta_k.

    Kinds: ``constant`` (eta_k = base), ``horizon_sqrt`` (base / sqrt(K),
    constant over a run of known horizon K), ``anytime_sqrt``
    (base / sqrt(k)).  All emit nonincreasing sequences.
    """

    kind: str
    base: float
    horizon: Optional[int] = None

    def eta(self, k: int) -> float:
        if self.kind == "constant":
            return self.base
        if self.kind == "horizon_sqrt":
            if self.horizon is None:
                raise ValueError("horizon_sqrt schedule used without a horizon")
            return self.base / math.sqrt(self.horizon)
        if self.kind == "anytime_sqrt":
            return self.base / math.sqrt(k)
        raise ValueError(f"unknown schedule kind {self.kind!r}")

    def describe(self) -> str:
        if self.kind == "constant":
            return f"constant:{self.base!r}"
        if self.kind == "horizon_sqrt":
            return f"horizon_sqrt:{self.base!r}/sqrt({self.horizon})"
        return f"anytime_sqrt:{self.base!r}/sqrt(k)"


@dataclass(frozen=True)
class LearnerState:
    """State of the online stepsize learner."""

    method: str  # "ogd" | "adagrad"
    stepsize: Stepsize
    candidate_set: CandidateSet
    schedule: Schedule
    iteration: int = 1
    accumulator: Union[None, float, np.ndarray] = None
    eps: float = ADAGRAD_EPS

    def eta(self) -> float:
        return self.schedule.eta(self.iteration)


def ogd_step(state: LearnerState, grad) -> LearnerState:
    """One projected online gradient descent step on the feedback gradient."""
    eta = state.eta()
    moved = sz.axpy(state.stepsize, -eta, grad)
    projected = state.candidate_set.project(moved)
    return replace(state, stepsize=projected, iteration=state.iteration + 1)


def adagrad_step(state: LearnerState, grad) -> LearnerState:
    """Diagonal AdaGrad step: entrywise rate eta / (sqrt(sum g^2) + eps)."""
    eta = state.eta()
    if state.stepsize.pattern == "scalar":
        g2 = float(grad) ** 2
        acc = (state.accumulator or 0.0) + g2
        step = eta * float(grad) / (math.sqrt(acc) + state.eps)
    else:
        g = np.asarray(grad, dtype=float)
        acc = (0.0 if state.accumulator is None else state.accumulator) + g * g
        step = eta * g / (np.sqrt(acc) + state.eps)
    moved = sz.axpy(state.stepsize, -1.0, step)
    projected = state.candidate_set.project(moved)
    return replace(
        state, stepsize=projected, iteration=state.iteration + 1, accumulator=acc
    )


def learner_step(state: LearnerState, grad) -> LearnerState:
    if state.method == "adagrad":
        return adagrad_step(state, grad)
    return ogd_step(state, grad)


def default_schedule(
    feedback: str,
    action: str,
    problem: Problem,
    candidate_set: CandidateSet,
    pattern: str = "full",
    horizon: Optional[int] = None,
) -> Schedule:
    """The analysis-prescribed learning rate for a feedback/action pair.

    Lookahead-style actions admit a constant rate (1/(2L^2) for ratio
    feedback, 1/L for hypergradient feedback).  Without a lookahead step
    the rate decays like 1/sqrt(k) with constants built from the
    candidate-set diameter D and the feedback Lipschitz constant.
    """
    L = problem.smoothness
    lookahead = action in ("lookahead", "monotone_lookahead")
    if feedback == "ratio" and lookahead:
        return Schedule("constant", 1.0 / (2.0 * L * L))
    if feedback == "hypergradient" and lookahead:
        return Schedule("constant", 1.0 / L)
    D = candidate_set.diam(pattern, problem.dim)
    if D is None:
        raise ValueError(
            f"the {feedback}/{action} schedule needs a bounded candidate set "
            "(its rate depends on the set diameter)"
        )
    if feedback == "ratio":
        base = D / (2.0 * L * (L * D + 1.0))
    else:
        base = D / (L * D + 1.0)
    if horizon is not None:
        return Schedule("horizon_sqrt", base, horizon=horizon)
    return Schedule("anytime_sqrt", base)


def clamp_schedule(state: LearnerState, new_schedule: Schedule) -> LearnerState:
    """Replace the schedule after a smoothness revision, never increasing eta.

    The emitted rate sequence must stay nonincreasing across the revision,
    so the new schedule's base is capped to keep eta at the current
    iteration no larger than before.
    """
    k = state.iteration
    old_eta = state.schedule.eta(k)
    new_eta = new_schedule.eta(k)
    if new_eta > old_eta:
        scale = old_eta / new_eta
        new_schedule = replace(new_schedule, base=new_schedule.base * scale)
    return replace(state, schedule=new_schedule)


@dataclass
class BenchmarkTrack:
    """Accumulators for one fixed benchmark stepsize."""

    stepsize: Stepsize
    in_set: bool = True
    cumulative: float = 0.0
    steps: int = 0
    per_step_worst: float = math.inf  # descent inequality slack
    static_worst: float = math.inf  # static regret slack over all K
    values: list = field(default_factory=list)
    dist_sq: list = field(default_factory=list)  # dist(P_k, bench)^2, k = 1..K+1


@dataclass
class SequenceTrack:
    """Accumulators for a benchmark sequence of stepsizes."""

    cumulative: float = 0.0
    path_length: float = 0.0
    previous: Optional[Stepsize] = None
    dynamic_worst: float = math.inf
    values: list = field(default_factory=list)
    dist_p1_sq_last: float = 0.0
    switches: int = 0


class RegretTracker:
    """Accumulates regret quantities along a solver run.

    Tracks the learner's cumulative feedback, the squared native norms of
    its feedback gradients, the maximal drift from the initial stepsize,
    and per-benchmark accumulators for the per-step, static, and dynamic
    regret inequalities.
    """

    def __init__(self, p1: Stepsize, constant_eta: Optional[float] = None):
        self.p1 = p1
        self.constant_eta = constant_eta
        self.cumulative_feedback = 0.0
        self.grad_sq_sum = 0.0
        self.eta_grad_sq_half_sum = 0.0
        self.max_drift = 0.0
        self.first_eta: Optional[float] = None
        self.steps = 0
        self.benchmarks: dict[str, BenchmarkTrack] = {}
        self.sequences: dict[str, SequenceTrack] = {}

    def register_benchmark(self, name: str, bench: Stepsize, in_set: bool = True):
        track = BenchmarkTrack(stepsize=bench, in_set=in_set)
        track.dist_sq.append(sz.distance(self.p1, bench) ** 2)
        self.benchmarks[name] = track

    def register_sequence(self, name: str):
        self.sequences[name] = SequenceTrack()

    def update(
        self,
        sample: FeedbackSample,
        p_before: Stepsize,
        p_after: Stepsize,
        eta: float,
        grad_native_sq: float,
        benchmark_values: Optional[dict] = None,
        sequence_values: Optional[dict] = None,
    ):
        """Record one learner step.

        ``benchmark_values`` maps benchmark names to the feedback value at
        the benchmark stepsize; ``sequence_values`` maps sequence names to
        ``(stepsize_k, value)`` pairs.
        """
        self.steps += 1
        if self.first_eta is None:
            self.first_eta = eta
        self.cumulative_feedback += sample.value
        self.grad_sq_sum += grad_native_sq
        self.eta_grad_sq_half_sum += 0.5 * eta * grad_native_sq
        self.max_drift = max(self.max_drift, sz.distance(p_before, self.p1))
        for name, value in (benchmark_values or {}).items():
            track = self.benchmarks[name]
            track.values.append(value)
            track.cumulative += value
            track.steps += 1
            before = track.dist_sq[-1]
            after = sz.distance(p_after, track.stepsize) ** 2
            track.dist_sq.append(after)
            slack = (
                before
                - 2.0 * eta * (sample.value - value)
                + eta * eta * grad_native_sq
                - after
            )
            track.per_step_worst = min(track.per_step_worst, slack)
            rhs = (
                track.cumulative
                + track.dist_sq[0] / (2.0 * self.first_eta)
                + self.eta_grad_sq_half_sum
            )
            track.static_worst = min(
                track.static_worst, rhs - self.cumulative_feedback
            )
        for name, (bench_k, value) in (sequence_values or {}).items():
            track = self.sequences[name]
            track.values.append(value)
            track.cumulative += value
            if track.previous is not None:
                hop = sz.distance(track.previous, bench_k)
                track.path_length += hop
                if hop > 0:
                    track.switches += 1
            track.previous = bench_k
            track.dist_p1_sq_last = sz.distance(bench_k, self.p1) ** 2
            if self.constant_eta is not None:
                eta_c = self.constant_eta
                rhs = (
                    track.cumulative
                    + 0.5 * eta_c * self.grad_sq_sum
                    + track.dist_p1_sq_last / (2.0 * eta_c)
                    + self.max_drift * track.path_length / eta_c
                )
                track.dynamic_worst = min(
                    track.dynamic_worst, rhs - self.cumulative_feedback
                )

    def benchmark_feedback(self) -> dict[str, float]:
        return {name: t.cumulative for name, t in self.benchmarks.items()}

    @property
    def path_length(self) -> float:
        if not self.sequences:
            return 0.0
        return max(t.path_length for t in self.sequences.values())


def update_regret(
    tracker: RegretTracker,
    sample: FeedbackSample,
    benchmarks: Optional[dict] = None,
    sequences: Optional[dict] = None,
    *,
    p_before: Stepsize,
    p_after: Stepsize,
    eta: float,
    grad_native_sq: float,
) -> RegretTracker:
    """Functional wrapper over :meth:`RegretTracker.update`."""
    tracker.update(
        sample,
        p_before=p_before,
        p_after=p_after,
        eta=eta,
        grad_native_sq=grad_native_sq,
        benchmark_values=benchmarks,
        sequence_values=sequences,
    )
    return tracker
