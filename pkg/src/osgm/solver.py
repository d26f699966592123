"""The main loop: feedback x landscape action x online learner.

``run_osgm`` iterates the three-step loop (propose, act, learn) with the
feedback always evaluated at the current iterate and current stepsize.
``run_hdm`` implements the classical hypergradient-descent update, which
swaps the stepsize update ahead of the x-step; with rate 1/L, no
projection, and a full matrix it produces the same iterates as the
lookahead hypergradient variant.  ``run_gd`` is the fixed-stepsize
baseline and ``run_osgm_heavyball`` an explicitly experimental mode that
learns a momentum coefficient alongside the stepsize.

Oracle calls are counted exactly as spent: each iteration charges the
proposal's function and gradient evaluation, plus the landscape action's
own price.  Monitors query the objective through their own handle and are
never charged, so traces are identical with monitoring on or off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from . import stepsize as sz
from .diagnostics import (
    MonitorContext,
    MonitorReport,
    PotentialSpec,
    RunMonitor,
    hessian_inverse_stepsize,
    potential_from_gap,
)
from .feedback import (
    TOL_GRAD,
    gap_tolerance,
    hypergradient_feedback,
    ratio_feedback,
)
from .learners import LearnerState, Schedule, default_schedule, learner_step
from .problems import Problem
from .stepsize import CandidateSet, Stepsize, scaled_identity

FEEDBACKS = ("ratio", "hypergradient")
MONOTONE_ACTIONS = ("monotone", "monotone_lookahead")

CSV_COLUMNS = (
    "k",
    "f_gap",
    "grad_norm",
    "feedback",
    "progress",
    "eta",
    "drift",
    "potential_phi",
    "potential_omega",
    "oracle_calls",
)


class ConfigError(ValueError):
    pass


@dataclass
class SolverConfig:
    """Configuration of one solver run."""

    x1: np.ndarray
    feedback: str = "ratio"
    action: str = "lookahead"
    learner: str = "ogd"
    pattern: str = "full"
    candidate_set: CandidateSet = field(default_factory=sz.unconstrained)
    p1: Optional[Stepsize] = None
    schedule: Union[str, Schedule] = "auto"
    max_iters: int = 1000
    stop_gap: float = 1e-10
    stop_grad: float = 1e-8
    monitors_enabled: bool = False
    seed: int = 0
    unsafe: bool = False
    delta_bound: Optional[float] = None
    benchmarks: Optional[dict] = None
    benchmark_sequences: Optional[dict] = None
    iterate_hook: Optional[Callable] = None  # called (k, x); testing aid


@dataclass
class SolverTrace:
    """Per-iteration record of a run plus terminal summary.

    Row k holds the state at iterate k (gap, gradient norm) together with
    that iteration's feedback, measured progress, learning rate, stepsize
    drift, potential values, and the cumulative oracle-call count.  Absent
    quantities are NaN in memory and empty fields in CSV.
    """

    meta: dict
    k: np.ndarray
    f_gap: np.ndarray
    grad_norm: np.ndarray
    feedback: np.ndarray
    progress: np.ndarray
    eta: np.ndarray
    drift: np.ndarray
    potential_phi: np.ndarray
    potential_omega: np.ndarray
    oracle_calls: np.ndarray
    status: str
    final_gap: float
    final_grad_norm: float

    def __len__(self) -> int:
        return len(self.k)

    def column(self, name: str) -> np.ndarray:
        return getattr(self, name)

    def to_csv(self, path: str) -> None:
        lines = []
        for key, value in self.meta.items():
            lines.append(f"# {key}={value}")
        lines.append(f"# status={self.status}")
        lines.append(f"# final_gap={_fmt(self.final_gap)}")
        lines.append(f"# final_grad_norm={_fmt(self.final_grad_norm)}")
        lines.append(",".join(CSV_COLUMNS))
        for i in range(len(self.k)):
            cells = [str(int(self.k[i]))]
            for name in CSV_COLUMNS[1:-1]:
                cells.append(_fmt(self.column(name)[i]))
            cells.append(str(int(self.oracle_calls[i])))
            lines.append(",".join(cells))
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def from_csv(cls, path: str) -> "SolverTrace":
        meta = {}
        rows = []
        header_seen = False
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if not line:
                    continue
                if line.startswith("#"):
                    key, _, value = line[1:].strip().partition("=")
                    meta[key] = value
                    continue
                if not header_seen:
                    if line.split(",") != list(CSV_COLUMNS):
                        raise ValueError(f"unexpected trace columns in {path}")
                    header_seen = True
                    continue
                rows.append(line.split(","))
        status = meta.pop("status", "unknown")
        final_gap = _parse(meta.pop("final_gap", ""))
        final_grad_norm = _parse(meta.pop("final_grad_norm", ""))
        cols = list(zip(*rows)) if rows else [[] for _ in CSV_COLUMNS]
        return cls(
            meta=meta,
            k=np.array([int(v) for v in cols[0]], dtype=int),
            f_gap=np.array([_parse(v) for v in cols[1]]),
            grad_norm=np.array([_parse(v) for v in cols[2]]),
            feedback=np.array([_parse(v) for v in cols[3]]),
            progress=np.array([_parse(v) for v in cols[4]]),
            eta=np.array([_parse(v) for v in cols[5]]),
            drift=np.array([_parse(v) for v in cols[6]]),
            potential_phi=np.array([_parse(v) for v in cols[7]]),
            potential_omega=np.array([_parse(v) for v in cols[8]]),
            oracle_calls=np.array([int(v) for v in cols[9]], dtype=int),
            status=status,
            final_gap=final_gap,
            final_grad_norm=final_grad_norm,
        )

    def equals(self, other: "SolverTrace") -> bool:
        if self.meta != other.meta or self.status != other.status:
            return False
        if not _float_eq(self.final_gap, other.final_gap):
            return False
        if not _float_eq(self.final_grad_norm, other.final_grad_norm):
            return False
        for name in CSV_COLUMNS:
            a, b = self.column(name), other.column(name)
            if len(a) != len(b):
                return False
            if name in ("k", "oracle_calls"):
                if not np.array_equal(a, b):
                    return False
            elif not np.array_equal(a, b, equal_nan=True):
                return False
        return True


def _fmt(v: float) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return repr(float(v))


def _parse(s: str) -> float:
    return float(s) if s else math.nan


def _float_eq(a: float, b: float) -> bool:
    return (math.isnan(a) and math.isnan(b)) or a == b


class _Rows:
    """Column accumulator for trace construction."""

    def __init__(self):
        self.data = {name: [] for name in CSV_COLUMNS}

    def append(self, **kwargs):
        for name in CSV_COLUMNS:
            self.data[name].append(kwargs[name])

    def arrays(self):
        out = {}
        for name in CSV_COLUMNS:
            dtype = int if name in ("k", "oracle_calls") else float
            out[name] = np.array(self.data[name], dtype=dtype)
        return out


def _resolve_config(problem: Problem, config: SolverConfig) -> tuple[Stepsize, Schedule]:
    if config.feedback not in FEEDBACKS:
        raise ConfigError(f"unknown feedback {config.feedback!r}")
    if config.pattern not in sz.PATTERNS:
        raise ConfigError(f"unknown pattern {config.pattern!r}")
    if config.learner not in ("ogd", "adagrad"):
        raise ConfigError(f"unknown learner {config.learner!r}")
    from .landscape import ACTIONS

    if config.action not in ACTIONS:
        raise ConfigError(f"unknown action {config.action!r}")
    if (
        config.feedback == "hypergradient"
        and config.action not in MONOTONE_ACTIONS
        and not config.unsafe
    ):
        raise ConfigError(
            "hypergradient feedback requires a monotone action (monotone or "
            "monotone-lookahead); its convergence reduction needs nonincreasing "
            "objective values. Pass unsafe=True to override."
        )
    if config.feedback == "ratio" and problem.opt_value is None:
        raise ConfigError("ratio feedback requires the problem's optimal value")
    x1 = np.asarray(config.x1, dtype=float)
    if x1.shape != (problem.dim,):
        raise ConfigError(
            f"x1 has shape {x1.shape} but the problem dimension is {problem.dim}"
        )
    p1 = config.p1
    if p1 is None:
        p1 = scaled_identity(1.0 / problem.smoothness, problem.dim, config.pattern)
    if p1.pattern != config.pattern or p1.dim != problem.dim:
        raise ConfigError("initial stepsize does not match the configured pattern")
    projected = config.candidate_set.project(p1)
    if sz.distance(projected, p1) > 1e-12 * (1.0 + p1.frobenius_norm()):
        raise ConfigError("initial stepsize lies outside the candidate set")
    if config.schedule == "auto":
        if config.learner == "adagrad":
            schedule = Schedule("constant", 0.1 / problem.smoothness)
        else:
            schedule = default_schedule(
                config.feedback,
                config.action,
                problem,
                config.candidate_set,
                pattern=config.pattern,
            )
    elif isinstance(config.schedule, Schedule):
        schedule = config.schedule
    else:
        raise ConfigError(f"unsupported schedule {config.schedule!r}")
    return p1, schedule


def _set_descriptor(cset: CandidateSet) -> str:
    if cset.kind == "unconstrained":
        return "none"
    if cset.kind == "box":
        return f"box:{cset.lo!r},{cset.hi!r}"
    if cset.kind == "nonneg":
        return "nonneg"
    return f"ball:{cset.radius!r}"


def _base_meta(problem: Problem, config: SolverConfig, schedule, mode: str) -> dict:
    meta = {
        "mode": mode,
        "problem": problem.name,
        "dim": str(problem.dim),
        "L": repr(problem.smoothness),
        "mu": repr(problem.strong_convexity),
    }
    if problem.kappa is not None:
        meta["kappa"] = repr(problem.kappa)
    if problem.kappa_star_diag is not None:
        meta["kappa_star_diag"] = repr(problem.kappa_star_diag)
    if problem.opt_value is not None:
        meta["f_star"] = repr(problem.opt_value)
        meta["f_star_estimated"] = str(problem.opt_value_estimated).lower()
    if mode == "osgm":
        meta.update(
            feedback=config.feedback,
            action=config.action,
            learner=config.learner,
        )
    meta.update(
        pattern=config.pattern,
        set=_set_descriptor(config.candidate_set),
        eta=schedule.describe() if schedule is not None else "",
        iters=str(config.max_iters),
        stop_gap=repr(config.stop_gap),
        stop_grad=repr(config.stop_grad),
        seed=str(config.seed),
    )
    if (
        config.feedback == "ratio"
        and mode == "osgm"
        and problem.opt_value_estimated
    ):
        meta["warning"] = "ratio feedback uses a numerically estimated optimal value"
    return meta


def _trace_potential_specs(problem, config, pattern, gap1):
    """Potential specs recorded in the trace columns, when evaluable."""
    L = problem.smoothness
    mu = problem.strong_convexity
    if problem.opt_value is None:
        return None, None
    anchor = scaled_identity(1.0 / L, problem.dim, pattern)
    if config.feedback == "ratio":
        bench = hessian_inverse_stepsize(problem, pattern) or anchor
        return PotentialSpec("phi_r", 1.0 / L**2, bench), None
    phi = PotentialSpec("phi_h", 1.0 / (L * mu), anchor) if mu > 0 else None
    delta = None
    if mu > 0 and gap1 is not None:
        delta = math.sqrt(2.0 * max(gap1, 0.0) / mu)
    elif config.delta_bound is not None:
        delta = config.delta_bound
    omega = (
        PotentialSpec("omega_h", 2.0 * delta**2 / L, anchor)
        if delta is not None
        else None
    )
    return phi, omega


def run_osgm(problem: Problem, config: SolverConfig) -> tuple[SolverTrace, MonitorReport]:
    """Run the online scaled gradient loop; returns the trace and the
    monitor report (empty when monitoring is disabled)."""
    from .landscape import act

    p1, schedule = _resolve_config(problem, config)
    L = problem.smoothness
    f_star = problem.opt_value
    x = np.array(config.x1, dtype=float)
    learner = LearnerState(
        method=config.learner,
        stepsize=p1,
        candidate_set=config.candidate_set,
        schedule=schedule,
    )
    f_calls = g_calls = 0
    fx = problem.value(x)
    gx = problem.grad(x)
    f_calls += 1
    g_calls += 1
    gap1 = fx - f_star if f_star is not None else None
    phi_spec, omega_spec = _trace_potential_specs(problem, config, config.pattern, gap1)
    monitor = RunMonitor(
        MonitorContext(
            problem=problem,
            feedback=config.feedback,
            action=config.action,
            pattern=config.pattern,
            candidate_set=config.candidate_set,
            p1=p1,
            schedule=schedule,
            learner=config.learner,
            delta_bound=config.delta_bound,
        ),
        enabled=config.monitors_enabled,
        extra_benchmarks=config.benchmarks,
        sequences=config.benchmark_sequences,
    )
    rows = _Rows()
    status = "max_iters"
    ratio_tol = gap_tolerance(problem) if f_star is not None else None
    hooked = 0
    for k in range(1, config.max_iters + 1):
        if config.iterate_hook is not None:
            config.iterate_hook(k, x)
            hooked = k
        gap = fx - f_star if f_star is not None else None
        grad_norm = float(np.linalg.norm(gx))
        if gap is not None and gap <= config.stop_gap:
            status = "converged"
            break
        if grad_norm <= config.stop_grad:
            status = "stationary"
            break
        if config.feedback == "ratio" and gap <= ratio_tol:
            status = "converged"
            break
        if grad_norm * grad_norm <= TOL_GRAD**2:
            status = "stationary"
            break
        P = learner.stepsize
        if config.feedback == "ratio":
            sample = ratio_feedback(problem, x, P, fx=fx, gx=gx)
        else:
            sample = hypergradient_feedback(problem, x, P, fx=fx, gx=gx)
        f_calls += 1
        g_calls += 1
        outcome = act(
            config.action,
            x,
            sample.proposal,
            problem,
            L,
            fx=fx,
            f_proposal=sample.f_at_proposal,
            grad_proposal=sample.grad_at_proposal,
        )
        if config.action in ("lookahead", "monotone_lookahead"):
            f_calls += 1  # the lookahead point's function value
        x_next, f_next = outcome.x_next, outcome.f_next
        if outcome.grad_next is not None:
            g_next = outcome.grad_next
        elif not outcome.accepted_proposal:
            g_next = gx
        else:
            g_next = problem.grad(x_next)
            g_calls += 1
        if config.feedback == "ratio":
            progress = (f_next - f_star) / gap
        else:
            progress = (f_next - fx) / (grad_norm * grad_norm)
        grad_c = sz.contract_gradient(sample, config.pattern)
        grad_native_sq = sz.native_norm(config.pattern, grad_c) ** 2
        eta = learner.eta()
        learner_next = learner_step(learner, grad_c)
        phi = (
            potential_from_gap(
                phi_spec, gap, sz.distance(P, phi_spec.benchmark) ** 2
            )
            if phi_spec is not None and gap is not None
            else math.nan
        )
        omega = (
            potential_from_gap(
                omega_spec, gap, sz.distance(P, omega_spec.benchmark) ** 2
            )
            if omega_spec is not None and gap is not None
            else math.nan
        )
        rows.append(
            k=k,
            f_gap=gap if gap is not None else math.nan,
            grad_norm=grad_norm,
            feedback=sample.value,
            progress=progress,
            eta=eta,
            drift=P.drift_from(p1),
            potential_phi=phi,
            potential_omega=omega,
            oracle_calls=f_calls + g_calls,
        )
        monitor.observe(
            k=k,
            x=x,
            fx=fx,
            gap=gap,
            gx=gx,
            grad_norm=grad_norm,
            sample=sample,
            f_next=f_next,
            progress=progress,
            p_before=P,
            p_after=learner_next.stepsize,
            eta=eta,
            grad_native_sq=grad_native_sq,
        )
        x, fx, gx, learner = x_next, f_next, g_next, learner_next
    if config.iterate_hook is not None and len(rows.data["k"]) + 1 > hooked:
        config.iterate_hook(len(rows.data["k"]) + 1, x)
    final_gap = fx - f_star if f_star is not None else math.nan
    final_grad_norm = float(np.linalg.norm(gx))
    monitor.finalize(final_gap, final_grad_norm, status)
    meta = _base_meta(problem, config, schedule, "osgm")
    trace = SolverTrace(
        meta=meta,
        status=status,
        final_gap=final_gap,
        final_grad_norm=final_grad_norm,
        **rows.arrays(),
    )
    return trace, monitor.report()


def run_gd(
    problem: Problem,
    stepsize: Stepsize,
    x1,
    max_iters: int,
    stop_gap: float = 1e-10,
    stop_grad: float = 1e-8,
) -> SolverTrace:
    """Fixed-stepsize preconditioned gradient descent baseline."""
    f_star = problem.opt_value
    x = np.array(x1, dtype=float)
    f_calls = g_calls = 0
    fx = problem.value(x)
    gx = problem.grad(x)
    f_calls += 1
    g_calls += 1
    rows = _Rows()
    status = "max_iters"
    for k in range(1, max_iters + 1):
        gap = fx - f_star if f_star is not None else None
        grad_norm = float(np.linalg.norm(gx))
        if gap is not None and gap <= stop_gap:
            status = "converged"
            break
        if grad_norm <= stop_grad:
            status = "stationary"
            break
        x_next = x - stepsize.apply(gx)
        f_next = problem.value(x_next)
        g_next = problem.grad(x_next)
        f_calls += 1
        g_calls += 1
        progress = (
            (f_next - f_star) / gap if (gap is not None and gap > 0) else math.nan
        )
        rows.append(
            k=k,
            f_gap=gap if gap is not None else math.nan,
            grad_norm=grad_norm,
            feedback=math.nan,
            progress=progress,
            eta=math.nan,
            drift=0.0,
            potential_phi=math.nan,
            potential_omega=math.nan,
            oracle_calls=f_calls + g_calls,
        )
        x, fx, gx = x_next, f_next, g_next
    final_gap = fx - f_star if f_star is not None else math.nan
    meta = {
        "mode": "gd",
        "problem": problem.name,
        "dim": str(problem.dim),
        "L": repr(problem.smoothness),
        "mu": repr(problem.strong_convexity),
        "pattern": stepsize.pattern,
        "iters": str(max_iters),
        "stop_gap": repr(stop_gap),
        "stop_grad": repr(stop_grad),
    }
    return SolverTrace(
        meta=meta,
        status=status,
        final_gap=final_gap,
        final_grad_norm=float(np.linalg.norm(gx)),
        **rows.arrays(),
    )


def run_hdm(problem: Problem, config: SolverConfig) -> SolverTrace:
    """Classical hypergradient descent: update the stepsize first, then
    step in x with the freshly updated stepsize.  Requires an
    unconstrained candidate set (the swapped update admits no projection)
    and a full or diagonal pattern."""
    if config.candidate_set.kind != "unconstrained":
        raise ConfigError("hypergradient descent requires an unconstrained set")
    if config.pattern not in ("full", "diag"):
        raise ConfigError("hypergradient descent supports full or diagonal patterns")
    schedule = config.schedule
    if schedule == "auto":
        schedule = Schedule("constant", 1.0 / problem.smoothness)
    if not isinstance(schedule, Schedule):
        raise ConfigError(f"unsupported schedule {config.schedule!r}")
    p1 = config.p1
    if p1 is None:
        p1 = scaled_identity(1.0 / problem.smoothness, problem.dim, config.pattern)
    f_star = problem.opt_value
    x = np.array(config.x1, dtype=float)
    learner = LearnerState(
        method="ogd",
        stepsize=p1,
        candidate_set=config.candidate_set,
        schedule=schedule,
    )
    f_calls = g_calls = 0
    fx = problem.value(x)
    gx = problem.grad(x)
    f_calls += 1
    g_calls += 1
    rows = _Rows()
    status = "max_iters"
    hooked = 0
    for k in range(1, config.max_iters + 1):
        if config.iterate_hook is not None:
            config.iterate_hook(k, x)
            hooked = k
        gap = fx - f_star if f_star is not None else None
        grad_norm = float(np.linalg.norm(gx))
        if gap is not None and gap <= config.stop_gap:
            status = "converged"
            break
        if grad_norm <= config.stop_grad:
            status = "stationary"
            break
        if grad_norm * grad_norm <= TOL_GRAD**2:
            status = "stationary"
            break
        P = learner.stepsize
        sample = hypergradient_feedback(problem, x, P, fx=fx, gx=gx)
        f_calls += 1
        g_calls += 1
        grad_c = sz.contract_gradient(sample, config.pattern)
        eta = learner.eta()
        learner_next = learner_step(learner, grad_c)
        x_next = x - learner_next.stepsize.apply(gx)
        f_next = problem.value(x_next)
        g_next = problem.grad(x_next)
        f_calls += 1
        g_calls += 1
        progress = (f_next - fx) / (grad_norm * grad_norm)
        rows.append(
            k=k,
            f_gap=gap if gap is not None else math.nan,
            grad_norm=grad_norm,
            feedback=sample.value,
            progress=progress,
            eta=eta,
            drift=P.drift_from(p1),
            potential_phi=math.nan,
            potential_omega=math.nan,
            oracle_calls=f_calls + g_calls,
        )
        x, fx, gx, learner = x_next, f_next, g_next, learner_next
    if config.iterate_hook is not None and len(rows.data["k"]) + 1 > hooked:
        config.iterate_hook(len(rows.data["k"]) + 1, x)
    final_gap = fx - f_star if f_star is not None else math.nan
    meta = _base_meta(problem, config, schedule, "hdm")
    return SolverTrace(
        meta=meta,
        status=status,
        final_gap=final_gap,
        final_grad_norm=float(np.linalg.norm(gx)),
        **rows.arrays(),
    )


class _MomentumSample:
    """Gradient factors of the heavy-ball potential feedback; shaped like
    a feedback sample so the pattern contractions apply unchanged."""

    def __init__(self, grad_at_proposal, grad_at_x, denom):
        self.grad_at_proposal = grad_at_proposal
        self.grad_at_x = grad_at_x
        self.denom = denom


def run_osgm_heavyball(
    problem: Problem,
    config: SolverConfig,
    momentum: tuple = ("fixed", 0.0),
    coupling: float = 1.0,
    experimental: bool = False,
) -> SolverTrace:
    """Heavy-ball mode: x' = x - P g + beta (x - x_prev).

    The feedback is the decrease of the Lyapunov-style potential
    f(x) + (coupling/2) ||x - x_prev||^2 normalized by ||g||^2; the
    optimal value cancels in the difference, so no f* is needed.  This
    mode is a heuristic extrapolation and is excluded from the theorem
    monitors; it must be explicitly marked experimental.
    """
    if not experimental:
        raise ConfigError("heavy-ball mode is experimental; pass experimental=True")
    mode, beta = momentum
    if mode not in ("fixed", "learned"):
        raise ConfigError("momentum must be ('fixed', beta) or ('learned', beta0)")
    if coupling < 0:
        raise ConfigError("potential coupling must be nonnegative")
    schedule = config.schedule
    if schedule == "auto":
        schedule = Schedule("constant", 1.0 / problem.smoothness)
    p1 = config.p1
    if p1 is None:
        p1 = scaled_identity(1.0 / problem.smoothness, problem.dim, config.pattern)
    f_star = problem.opt_value
    x = np.array(config.x1, dtype=float)
    x_prev = x.copy()
    beta = float(beta)
    learner = LearnerState(
        method=config.learner,
        stepsize=p1,
        candidate_set=config.candidate_set,
        schedule=schedule,
    )
    f_calls = g_calls = 0
    fx = problem.value(x)
    gx = problem.grad(x)
    f_calls += 1
    g_calls += 1
    rows = _Rows()
    status = "max_iters"
    for k in range(1, config.max_iters + 1):
        gap = fx - f_star if f_star is not None else None
        grad_norm = float(np.linalg.norm(gx))
        if gap is not None and gap <= config.stop_gap:
            status = "converged"
            break
        if grad_norm <= config.stop_grad:
            status = "stationary"
            break
        gsq = float(gx @ gx)
        P = learner.stepsize
        v = x - x_prev
        x_plus = x - P.apply(gx) + beta * v
        f_plus = problem.value(x_plus)
        g_plus = problem.grad(x_plus)
        f_calls += 1
        g_calls += 1
        step_vec = x_plus - x
        pot_diff = f_plus - fx + 0.5 * coupling * (
            float(step_vec @ step_vec) - float(v @ v)
        )
        value = pot_diff / gsq
        m = g_plus + coupling * step_vec
        sample = _MomentumSample(m, gx, gsq)
        grad_c = sz.contract_gradient(sample, config.pattern)
        eta = learner.eta()
        learner_next = learner_step(learner, grad_c)
        if mode == "learned":
            grad_beta = float(m @ v) / gsq
            beta = min(max(beta - eta * grad_beta, 0.0), 0.99)
        rows.append(
            k=k,
            f_gap=gap if gap is not None else math.nan,
            grad_norm=grad_norm,
            feedback=value,
            progress=(f_plus - fx) / gsq,
            eta=eta,
            drift=P.drift_from(p1),
            potential_phi=math.nan,
            potential_omega=math.nan,
            oracle_calls=f_calls + g_calls,
        )
        x_prev, x, fx, gx, learner = x, x_plus, f_plus, g_plus, learner_next
    final_gap = fx - f_star if f_star is not None else math.nan
    meta = _base_meta(problem, config, schedule, "heavyball")
    meta["momentum"] = f"{mode}:{beta!r}"
    meta["coupling"] = repr(coupling)
    meta["experimental"] = "true"
    return SolverTrace(
        meta=meta,
        status=status,
        final_gap=final_gap,
        final_grad_norm=float(np.linalg.norm(gx)),
        **rows.arrays(),
    )
