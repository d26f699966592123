"""Stepsize parameterizations and candidate sets.

A stepsize scales the gradient in the update ``x <- x - P g``.  Three
patterns are supported:

* ``scalar``: a single real alpha, acting as ``alpha * I``;
* ``diag``:   a vector d, acting as ``Diag(d)``;
* ``full``:   an arbitrary n-by-n matrix.

The online learner optimizes over the pattern's own parameter space, so
distances and gradient norms used in learner-facing code are the natural
Euclidean norms of that space (absolute value / vector 2-norm / Frobenius
norm).  ``Stepsize.frobenius_norm`` instead reports the norm of the embedded
n-by-n matrix (``|alpha| * sqrt(n)`` for the scalar pattern), which is what
trace files record.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

PATTERNS = ("scalar", "diag", "full")

GradientLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class Stepsize:
    """A gradient scaling with one of the supported patterns."""

    pattern: str
    value: Union[float, np.ndarray]
    dim: int

    def apply(self, g: np.ndarray) -> np.ndarray:
        """Return P g for a gradient-shaped vector g."""
        g = np.asarray(g, dtype=float)
        if g.shape != (self.dim,):
            raise ValueError(
                f"dimension mismatch: stepsize has dim {self.dim}, vector has shape {g.shape}"
            )
        if self.pattern == "scalar":
            return self.value * g
        if self.pattern == "diag":
            return self.value * g
        return self.value @ g

    def as_matrix(self) -> np.ndarray:
        """Dense n-by-n embedding of the stepsize."""
        if self.pattern == "scalar":
            return self.value * np.eye(self.dim)
        if self.pattern == "diag":
            return np.diag(self.value)
        return np.array(self.value, dtype=float)

    def frobenius_norm(self) -> float:
        """Frobenius norm of the embedded matrix."""
        if self.pattern == "scalar":
            return abs(self.value) * np.sqrt(self.dim)
        return float(np.linalg.norm(self.value))

    def drift_from(self, other: "Stepsize") -> float:
        """Frobenius-embedding distance to another stepsize of the same pattern."""
        _check_same(self, other)
        if self.pattern == "scalar":
            return abs(self.value - other.value) * np.sqrt(self.dim)
        return float(np.linalg.norm(self.value - other.value))


def scalar_stepsize(alpha: float, dim: int) -> Stepsize:
    return Stepsize("scalar", float(alpha), int(dim))


def diag_stepsize(d) -> Stepsize:
    d = np.array(d, dtype=float)
    if d.ndim != 1:
        raise ValueError("diagonal stepsize expects a 1-d vector")
    return Stepsize("diag", d, d.shape[0])


def full_stepsize(P) -> Stepsize:
    P = np.array(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError("full stepsize expects a square matrix")
    return Stepsize("full", P, P.shape[0])


def scaled_identity(c: float, dim: int, pattern: str) -> Stepsize:
    """The stepsize c*I expressed in the given pattern."""
    if pattern == "scalar":
        return scalar_stepsize(c, dim)
    if pattern == "diag":
        return diag_stepsize(np.full(dim, float(c)))
    if pattern == "full":
        return full_stepsize(float(c) * np.eye(dim))
    raise ValueError(f"unknown pattern {pattern!r}")


def apply(s: Stepsize, g: np.ndarray) -> np.ndarray:
    return s.apply(g)


def _check_same(a: Stepsize, b: Stepsize) -> None:
    if a.pattern != b.pattern or a.dim != b.dim:
        raise ValueError(
            f"stepsize mismatch: {a.pattern}/{a.dim} vs {b.pattern}/{b.dim}"
        )


def distance(a: Stepsize, b: Stepsize) -> float:
    """Distance in the pattern's native parameter space."""
    _check_same(a, b)
    if a.pattern == "scalar":
        return abs(a.value - b.value)
    return float(np.linalg.norm(a.value - b.value))


def native_norm(pattern: str, grad: GradientLike) -> float:
    """Euclidean norm of a pattern-shaped gradient object."""
    if pattern == "scalar":
        return abs(float(grad))
    return float(np.linalg.norm(grad))


def axpy(s: Stepsize, coeff: float, grad: GradientLike) -> Stepsize:
    """Return the stepsize with parameters ``value + coeff * grad``."""
    if s.pattern == "scalar":
        return Stepsize("scalar", s.value + coeff * float(grad), s.dim)
    return Stepsize(s.pattern, s.value + coeff * np.asarray(grad, dtype=float), s.dim)


def contract_gradient(sample, pattern: str) -> GradientLike:
    """Contract a feedback gradient onto a stepsize pattern.

    The full-matrix feedback gradient is the rank-1 matrix
    ``-g_half g^T / denom``.  Its restriction to the scalar pattern is the
    trace contraction ``-<g_half, g> / denom`` and to the diagonal pattern
    the elementwise product ``-(g_half * g) / denom``.
    """
    g_half = sample.grad_at_proposal
    g = sample.grad_at_x
    denom = sample.denom
    if pattern == "scalar":
        return -float(np.dot(g_half, g)) / denom
    if pattern == "diag":
        return -(g_half * g) / denom
    if pattern == "full":
        return -np.outer(g_half, g) / denom
    raise ValueError(f"unknown pattern {pattern!r}")


@dataclass(frozen=True)
class CandidateSet:
    """Closed convex set of admissible stepsizes.

    Kinds: ``unconstrained``, entrywise ``box(lo, hi)``, entrywise
    ``nonneg``, and ``frobenius_ball(center, radius)``.  Box and nonneg
    sets apply entrywise to every pattern; the ball applies in the
    Frobenius embedding.
    """

    kind: str
    lo: Optional[float] = None
    hi: Optional[float] = None
    center: Optional[Stepsize] = None
    radius: Optional[float] = None

    def project(self, s: Stepsize) -> Stepsize:
        if self.kind == "unconstrained":
            return s
        if self.kind == "box":
            if s.pattern == "scalar":
                return Stepsize("scalar", min(max(s.value, self.lo), self.hi), s.dim)
            return Stepsize(s.pattern, np.clip(s.value, self.lo, self.hi), s.dim)
        if self.kind == "nonneg":
            if s.pattern == "scalar":
                return Stepsize("scalar", max(s.value, 0.0), s.dim)
            return Stepsize(s.pattern, np.maximum(s.value, 0.0), s.dim)
        if self.kind == "frobenius_ball":
            c = self.center
            if c is None:
                c = scaled_identity(0.0, s.dim, s.pattern)
            _check_same(s, c)
            dist = s.drift_from(c)
            if dist <= self.radius:
                return s
            t = self.radius / dist
            if s.pattern == "scalar":
                return Stepsize("scalar", c.value + t * (s.value - c.value), s.dim)
            return Stepsize(s.pattern, c.value + t * (s.value - c.value), s.dim)
        raise ValueError(f"unknown candidate set kind {self.kind!r}")

    def contains(self, s: Stepsize, tol: float = 1e-9) -> bool:
        p = self.project(s)
        return distance(p, s) <= tol * (1.0 + native_norm(s.pattern, s.value))

    def diam(self, pattern: str, dim: int) -> Optional[float]:
        """Diameter in the Frobenius embedding, or None when unbounded."""
        if self.kind == "box":
            width = self.hi - self.lo
            if pattern == "full":
                return width * dim
            return width * np.sqrt(dim)
        if self.kind == "frobenius_ball":
            return 2.0 * self.radius
        return None


def unconstrained() -> CandidateSet:
    return CandidateSet("unconstrained")


def box(lo: float, hi: float) -> CandidateSet:
    if not lo <= hi:
        raise ValueError(f"empty box: lo={lo} > hi={hi}")
    return CandidateSet("box", lo=float(lo), hi=float(hi))


def nonnegative() -> CandidateSet:
    return CandidateSet("nonneg")


def frobenius_ball(center: Optional[Stepsize], radius: float) -> CandidateSet:
    if radius <= 0:
        raise ValueError("ball radius must be positive")
    return CandidateSet("frobenius_ball", center=center, radius=float(radius))


def project(s: Stepsize, candidate_set: CandidateSet) -> Stepsize:
    return candidate_set.project(s)
