"""Landscape actions and backtracking estimation of the smoothness constant.

The landscape chooses the next iterate from the current point and the
scheduler's proposal.  Four actions are supported:

* ``vanilla``: accept the proposal;
* ``monotone``: null step, keep whichever of {proposal, current} is better;
* ``lookahead``: one extra 1/L gradient step from the proposal;
* ``monotone_lookahead``: keep whichever of {lookahead point, current} is
  better.

Each action has a fixed oracle-call price beyond the proposal's own
function evaluation: 0 / 1 f / 1 grad + 1 f / 1 grad + 2 f respectively.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .diagnostics import CheckRecord, action_progress_record
from .feedback import FeedbackSample, hypergradient_feedback
from .problems import Problem
from .stepsize import full_stepsize

ACTIONS = ("vanilla", "monotone", "lookahead", "monotone_lookahead")

ACTION_EXTRA_CALLS = {
    "vanilla": 0,
    "monotone": 1,
    "lookahead": 2,
    "monotone_lookahead": 3,
}


@dataclass(frozen=True)
class ActionOutcome:
    x_next: np.ndarray
    f_next: float
    kind: str
    accepted_proposal: bool
    extra_oracle_calls: int
    grad_next: Optional[np.ndarray] = None  # set when known for free


def act(
    kind: str,
    x: np.ndarray,
    proposal: np.ndarray,
    problem: Problem,
    L: float,
    fx: Optional[float] = None,
    f_proposal: Optional[float] = None,
    grad_proposal: Optional[np.ndarray] = None,
) -> ActionOutcome:
    """Apply a landscape action.

    Precomputed oracle values for x and the proposal may be passed in;
    the solver does so, leaving each action its nominal extra price.
    Ties in the monotone comparisons resolve to the moving candidate.
    """
    if kind not in ACTIONS:
        raise ValueError(f"unknown landscape action {kind!r}")
    if L <= 0:
        raise ValueError("smoothness constant must be positive")
    extra = ACTION_EXTRA_CALLS[kind]
    if kind == "vanilla":
        if f_proposal is None:
            f_proposal = problem.value(proposal)
        return ActionOutcome(proposal, f_proposal, kind, True, extra, grad_proposal)
    if kind == "monotone":
        if f_proposal is None:
            f_proposal = problem.value(proposal)
        if fx is None:
            fx = problem.value(x)
        if f_proposal <= fx:
            return ActionOutcome(proposal, f_proposal, kind, True, extra, grad_proposal)
        return ActionOutcome(x, fx, kind, False, extra, None)
    # lookahead kinds
    if grad_proposal is None:
        grad_proposal = problem.grad(proposal)
    y = proposal - (1.0 / L) * grad_proposal
    f_y = problem.value(y)
    if kind == "lookahead":
        return ActionOutcome(y, f_y, kind, True, extra, None)
    if fx is None:
        fx = problem.value(x)
    if f_y <= fx:
        return ActionOutcome(y, f_y, kind, True, extra, None)
    return ActionOutcome(x, fx, kind, False, extra, None)


def check_progress_inequalities(
    kind: str, sample: FeedbackSample, outcome: ActionOutcome, problem: Problem
) -> CheckRecord:
    """Evaluate the measured progress of an accepted iterate against the
    feedback-to-progress guarantee of the action that produced it."""
    if sample.kind == "ratio":
        f_x = sample.denom + problem.opt_value
    else:
        f_x = sample.f_at_proposal - sample.value * sample.denom
    return action_progress_record(kind, sample, outcome.f_next, f_x, problem)


def _smoothness_conditions_hold(problem: Problem, probe, L_trial: float) -> bool:
    """The two backtracking monitor conditions at a probe point.

    With stepsize matrix (1/L') I at the probe: the descent condition of a
    1/L' gradient step from the proposal, and the matching descent
    condition of a 1/L' feedback-gradient step in stepsize space.
    """
    x = np.asarray(probe, dtype=float)
    fx = problem.value(x)
    g = problem.grad(x)
    gsq = float(g @ g)
    if gsq <= 1e-24:
        return True  # stationary probe: nothing to certify
    if not (np.isfinite(fx) and np.all(np.isfinite(g))):
        return False
    n = x.shape[0]
    P = full_stepsize(np.eye(n) / L_trial)
    sample = hypergradient_feedback(problem, x, P, fx=fx, gx=g)
    g_half = sample.grad_at_proposal
    gh_sq = float(g_half @ g_half)
    # descent of a 1/L' gradient step from the proposal
    y = sample.proposal - g_half / L_trial
    lhs_f = problem.value(y) - sample.f_at_proposal
    rhs_f = -gh_sq / (2.0 * L_trial)
    cushion = 1e-12 * (abs(sample.f_at_proposal) + abs(lhs_f) + 1.0)
    if not (np.isfinite(lhs_f) and np.isfinite(rhs_f)) or lhs_f > rhs_f + cushion:
        return False
    # descent of a 1/L' feedback-gradient step in stepsize space
    grad_sq = gh_sq * gsq / (sample.denom**2)
    P_next = full_stepsize(P.value + np.outer(g_half, g) / (L_trial * sample.denom))
    h_next = (problem.value(x - P_next.apply(g)) - fx) / sample.denom
    lhs_h = h_next - sample.value
    rhs_h = -grad_sq / (2.0 * L_trial)
    cushion = 1e-12 * (abs(sample.value) + abs(h_next) + 1.0)
    return np.isfinite(lhs_h) and lhs_h <= rhs_h + cushion


def estimate_L(
    problem: Problem,
    probe,
    L_init: float,
    backtrack_factor: float = 0.5,
) -> float:
    """Smallest L' = L_init / factor^j satisfying both descent monitors
    at the probe point.  L' only ever grows; after 60 growth steps the
    objective is declared not smooth at the probe."""
    if L_init <= 0:
        raise ValueError("initial smoothness estimate must be positive")
    if not 0.0 < backtrack_factor < 1.0:
        raise ValueError("backtracking factor must lie in (0, 1)")
    L_trial = float(L_init)
    for _ in range(61):
        if _smoothness_conditions_hold(problem, probe, L_trial):
            return L_trial
        L_trial = L_trial / backtrack_factor
    raise ValueError("objective not L-smooth at probe: 60 growth steps exceeded")
