"""Ratio and hypergradient feedback functions with exact stepsize gradients.

Both feedback functions score a stepsize P by what one preconditioned
gradient step from x achieves:

* ratio feedback: (f(x - P g) - f*) / (f(x) - f*), the contraction ratio of
  the suboptimality (requires the optimal value);
* hypergradient feedback: (f(x - P g) - f(x)) / ||g||^2, the per-unit
  function decrease.

Both are convex and smooth in P, and both have the same rank-1 gradient
structure -grad_f(proposal) grad_f(x)^T / denom, differing only in the
normalizing denominator.  Samples keep the gradient in factored form; the
pattern contractions live in :mod:`osgm.stepsize`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .problems import Problem
from .stepsize import Stepsize

# Below these thresholds the iterate is treated as converged / stationary
# instead of dividing by a vanishing denominator.
TOL_GAP_FACTOR = 1e-14
TOL_GRAD = 1e-12


class ConvergedAtOptimum(Exception):
    """Suboptimality gap fell below tolerance; ratio feedback undefined."""


class StationaryPoint(Exception):
    """Gradient norm fell below tolerance; hypergradient feedback undefined."""


@dataclass(frozen=True)
class FeedbackSample:
    """One feedback evaluation at (x, P), with the gradient kept factored.

    The full-matrix feedback gradient is ``-grad_at_proposal grad_at_x^T /
    denom``; it is never materialized here.
    """

    kind: str  # "ratio" | "hypergradient"
    value: float
    grad_at_proposal: np.ndarray
    grad_at_x: np.ndarray
    denom: float
    proposal: np.ndarray
    f_at_proposal: float

    def full_gradient(self) -> np.ndarray:
        return -np.outer(self.grad_at_proposal, self.grad_at_x) / self.denom

    def gradient_frobenius_norm(self) -> float:
        """||gradient||_F via the rank-1 identity ||a b^T||_F = ||a|| ||b||."""
        return (
            float(np.linalg.norm(self.grad_at_proposal))
            * float(np.linalg.norm(self.grad_at_x))
            / self.denom
        )


def propose(x: np.ndarray, stepsize: Stepsize, g: np.ndarray) -> np.ndarray:
    """The scheduler's suggested iterate x - P g."""
    x = np.asarray(x, dtype=float)
    return x - stepsize.apply(g)


def gap_tolerance(problem: Problem) -> float:
    return TOL_GAP_FACTOR * max(1.0, abs(problem.opt_value or 0.0))


def ratio_feedback(
    problem: Problem,
    x: np.ndarray,
    stepsize: Stepsize,
    fx: Optional[float] = None,
    gx: Optional[np.ndarray] = None,
) -> FeedbackSample:
    """Evaluate the ratio feedback and its gradient factors at (x, P).

    ``fx`` and ``gx`` may carry precomputed oracle values for x; the
    solver passes them so each iteration is charged only the proposal's
    evaluations.
    """
    if problem.opt_value is None:
        raise ValueError("ratio feedback requires the problem's optimal value")
    x = np.asarray(x, dtype=float)
    if fx is None:
        fx = problem.value(x)
    if gx is None:
        gx = problem.grad(x)
    gap = fx - problem.opt_value
    if gap <= gap_tolerance(problem):
        raise ConvergedAtOptimum(f"suboptimality gap {gap:.3e} below tolerance")
    prop = x - stepsize.apply(gx)
    f_prop = problem.value(prop)
    g_prop = problem.grad(prop)
    return FeedbackSample(
        kind="ratio",
        value=(f_prop - problem.opt_value) / gap,
        grad_at_proposal=g_prop,
        grad_at_x=gx,
        denom=gap,
        proposal=prop,
        f_at_proposal=f_prop,
    )


def hypergradient_feedback(
    problem: Problem,
    x: np.ndarray,
    stepsize: Stepsize,
    fx: Optional[float] = None,
    gx: Optional[np.ndarray] = None,
) -> FeedbackSample:
    """Evaluate the hypergradient feedback and its gradient factors at (x, P)."""
    x = np.asarray(x, dtype=float)
    if fx is None:
        fx = problem.value(x)
    if gx is None:
        gx = problem.grad(x)
    sq = float(gx @ gx)
    if sq <= TOL_GRAD**2:
        raise StationaryPoint(f"gradient norm {np.sqrt(sq):.3e} below tolerance")
    prop = x - stepsize.apply(gx)
    f_prop = problem.value(prop)
    g_prop = problem.grad(prop)
    return FeedbackSample(
        kind="hypergradient",
        value=(f_prop - fx) / sq,
        grad_at_proposal=g_prop,
        grad_at_x=gx,
        denom=sq,
        proposal=prop,
        f_at_proposal=f_prop,
    )


@dataclass(frozen=True)
class FeedbackConstants:
    """Smoothness/Lipschitz constants of the feedback functions in P."""

    ratio_smoothness: float
    hyper_smoothness: float
    ratio_lipschitz: Optional[float] = None
    hyper_lipschitz: Optional[float] = None


def feedback_constants(problem: Problem, set_diam: Optional[float] = None) -> FeedbackConstants:
    """Constants 2L^2 / L (smoothness) and 2L(LD+1) / (LD+1) (Lipschitz,
    when the candidate-set diameter D is known)."""
    L = problem.smoothness
    if set_diam is None:
        return FeedbackConstants(ratio_smoothness=2.0 * L * L, hyper_smoothness=L)
    LD = L * set_diam
    return FeedbackConstants(
        ratio_smoothness=2.0 * L * L,
        hyper_smoothness=L,
        ratio_lipschitz=2.0 * L * (LD + 1.0),
        hyper_lipschitz=LD + 1.0,
    )
