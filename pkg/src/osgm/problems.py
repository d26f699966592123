"""Optimization problem oracles and canonical generators.

A :class:`Problem` bundles a differentiable objective oracle with the
metadata the solver and its runtime monitors need: the smoothness constant,
the strong convexity constant, and, when known, the optimal value, an
optimizer, the Hessian at the optimizer, a Hessian Lipschitz constant, and
the best condition number achievable with a diagonal scaling.

Built-in generators cover strongly convex quadratics, the classical
tridiagonal second-difference quadratic, a two-region piecewise quadratic
with different curvatures, and regularized logistic regression.  Problems
can also be loaded from a small JSON format (see :func:`load_problem`).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Optional

import numpy as np


@dataclass(frozen=True)
class Problem:
    """Immutable problem oracle with metadata.

    Oracle evaluation is pure; a Problem is safe to share between
    concurrent solver runs.
    """

    dim: int
    value_fn: Callable[[np.ndarray], float]
    grad_fn: Callable[[np.ndarray], np.ndarray]
    smoothness: float
    strong_convexity: float
    opt_value: Optional[float] = None
    opt_point: Optional[np.ndarray] = None
    hessian_at_opt: Optional[np.ndarray] = None
    hessian_lipschitz: Optional[float] = None
    kappa_star_diag: Optional[float] = None
    opt_value_estimated: bool = False
    hess_vec: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    name: str = "problem"

    def value(self, x: np.ndarray) -> float:
        return self.value_fn(np.asarray(x, dtype=float))

    def grad(self, x: np.ndarray) -> np.ndarray:
        return self.grad_fn(np.asarray(x, dtype=float))

    def eval(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        x = np.asarray(x, dtype=float)
        return self.value_fn(x), self.grad_fn(x)

    @property
    def kappa(self) -> Optional[float]:
        if self.strong_convexity > 0:
            return self.smoothness / self.strong_convexity
        return None


@dataclass
class OracleCounts:
    """Call counters for a counting problem wrapper."""

    value_calls: int = 0
    grad_calls: int = 0

    @property
    def total(self) -> int:
        return self.value_calls + self.grad_calls


def with_counting(problem: Problem) -> tuple[Problem, OracleCounts]:
    """Wrap a problem so every oracle call increments a counter."""
    counts = OracleCounts()

    def value_fn(x):
        counts.value_calls += 1
        return problem.value_fn(x)

    def grad_fn(x):
        counts.grad_calls += 1
        return problem.grad_fn(x)

    return replace(problem, value_fn=value_fn, grad_fn=grad_fn), counts


def make_quadratic(A, x_star) -> Problem:
    """Strongly convex quadratic f(x) = 0.5 <x - x*, A (x - x*)>.

    Parameters
    ----------
    A : (n, n) array
        Symmetric positive definite Hessian.
    x_star : (n,) array
        Minimizer.
    """
    A = np.array(A, dtype=float)
    x_star = np.array(x_star, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("quadratic matrix must be square")
    n = A.shape[0]
    if x_star.shape != (n,):
        raise ValueError(
            f"dimension mismatch: matrix is {n}x{n} but x_star has shape {x_star.shape}"
        )
    asym = np.max(np.abs(A - A.T))
    if asym > 1e-10 * max(1.0, np.max(np.abs(A))):
        raise ValueError(f"matrix must be symmetric; max |A - A^T| entry is {asym:.3e}")
    is_diagonal = np.count_nonzero(A - np.diag(np.diag(A))) == 0
    if is_diagonal:
        eigs = np.sort(np.diag(A))
    else:
        eigs = np.linalg.eigvalsh(A)
    if eigs[0] <= 0:
        raise ValueError(
            f"matrix must be positive definite; smallest eigenvalue is {eigs[0]:.6e}"
        )

    def value_fn(x):
        d = x - x_star
        return 0.5 * float(d @ (A @ d))

    def grad_fn(x):
        return A @ (x - x_star)

    return Problem(
        dim=n,
        value_fn=value_fn,
        grad_fn=grad_fn,
        smoothness=float(eigs[-1]),
        strong_convexity=float(eigs[0]),
        opt_value=0.0,
        opt_point=x_star,
        hessian_at_opt=A,
        hessian_lipschitz=0.0,
        kappa_star_diag=1.0 if is_diagonal else None,
        hess_vec=lambda x, v: A @ v,
        name=f"quadratic-{n}d",
    )


def tridiagonal_eigenvalues(n: int) -> np.ndarray:
    """Eigenvalues 4 sin^2(pi k / (2 (n + 1))), k = 1..n, of the n-by-n
    second-difference matrix tridiag(-1, 2, -1)."""
    k = np.arange(1, n + 1)
    return 4.0 * np.sin(np.pi * k / (2.0 * (n + 1))) ** 2


def make_tridiagonal(n: int) -> Problem:
    """Quadratic 0.5 <x, T x> with T the tridiagonal stencil (-1, 2, -1).

    The spectrum is known in closed form, which makes the problem a
    convenient ill-conditioned benchmark: the condition number grows like
    n^2, and no diagonal scaling improves it.
    """
    if n < 2:
        raise ValueError(f"tridiagonal problem needs n >= 2, got {n}")
    eigs = tridiagonal_eigenvalues(n)
    L = float(eigs[-1])
    mu = float(eigs[0])
    T = np.diag(np.full(n, 2.0)) + np.diag(np.full(n - 1, -1.0), 1) + np.diag(
        np.full(n - 1, -1.0), -1
    )

    def matvec(x):
        y = 2.0 * x
        y[:-1] -= x[1:]
        y[1:] -= x[:-1]
        return y

    def value_fn(x):
        return 0.5 * float(x @ matvec(x))

    def grad_fn(x):
        return matvec(x)

    return Problem(
        dim=n,
        value_fn=value_fn,
        grad_fn=grad_fn,
        smoothness=L,
        strong_convexity=mu,
        opt_value=0.0,
        opt_point=np.zeros(n),
        hessian_at_opt=T,
        hessian_lipschitz=0.0,
        kappa_star_diag=L / mu,
        hess_vec=lambda x, v: matvec(np.asarray(v, dtype=float)),
        name=f"tridiagonal-{n}",
    )


def make_random_quadratic(n: int, cond: float = 10.0, seed: int = 0) -> Problem:
    """Random dense SPD quadratic with log-spaced spectrum [1, cond]."""
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    eigs = np.logspace(0.0, np.log10(cond), n)
    A = Q @ np.diag(eigs) @ Q.T
    A = 0.5 * (A + A.T)
    x_star = rng.standard_normal(n)
    return make_quadratic(A, x_star)


def make_piecewise_quadratic() -> Problem:
    """Two-region piecewise quadratic on R^2.

    f(x1, x2) = 0.25 x1^2 + 0.5 x2^2 for x1 >= 0 and
    f(x1, x2) = 0.75 x1^2 + 0.5 x2^2 for x1 < 0.  The gradient on the
    boundary x1 = 0 uses the first branch; both branches agree there.
    The Hessian jumps across x1 = 0, so no Hessian metadata is attached.
    """

    def coeff(x1):
        return 0.25 if x1 >= 0 else 0.75

    def value_fn(x):
        c = coeff(x[0])
        return float(c * x[0] ** 2 + 0.5 * x[1] ** 2)

    def grad_fn(x):
        c = coeff(x[0])
        return np.array([2.0 * c * x[0], x[1]])

    return Problem(
        dim=2,
        value_fn=value_fn,
        grad_fn=grad_fn,
        smoothness=1.5,
        strong_convexity=0.5,
        opt_value=0.0,
        opt_point=np.zeros(2),
        name="piecewise2d",
    )


def piecewise_region_hessian_inverse(x: np.ndarray) -> np.ndarray:
    """Diagonal of the inverse Hessian of the piecewise quadratic at x.

    Within each region one preconditioned gradient step with this scaling
    lands exactly on the minimizer, so its ratio feedback is zero there.
    """
    if x[0] >= 0:
        return np.array([2.0, 1.0])
    return np.array([2.0 / 3.0, 1.0])


def _softplus(t: np.ndarray) -> np.ndarray:
    # log(1 + exp(t)), stable for large |t|
    out = np.empty_like(t)
    pos = t > 0
    out[pos] = t[pos] + np.log1p(np.exp(-t[pos]))
    out[~pos] = np.log1p(np.exp(t[~pos]))
    return out


def make_logistic(features, labels, reg: float, presolve_x0=None) -> Problem:
    """Regularized logistic regression loss.

    f(x) = (1/m) sum_i log(1 + exp(-y_i <a_i, x>)) + (reg/2) ||x||^2 with
    labels y_i in {-1, +1}.  The optimal value is found by an internal
    gradient-descent pre-solve (to gradient norm 1e-12) and is flagged as
    numerically estimated.
    """
    A = np.array(features, dtype=float)
    y = np.array(labels, dtype=float)
    if A.ndim != 2:
        raise ValueError("features must be a 2-d matrix")
    m, n = A.shape
    if y.shape != (m,):
        raise ValueError(
            f"dimension mismatch: {m} feature rows but labels have shape {y.shape}"
        )
    if not np.all(np.isin(y, (-1.0, 1.0))):
        bad = y[~np.isin(y, (-1.0, 1.0))][0]
        raise ValueError(f"labels must be +1 or -1, got {bad}")
    if reg < 0:
        raise ValueError("regularization must be nonnegative")

    gram_top = float(np.linalg.eigvalsh(A.T @ A)[-1])
    L = gram_top / (4.0 * m) + reg

    def value_fn(x):
        margins = y * (A @ x)
        return float(np.mean(_softplus(-margins)) + 0.5 * reg * float(x @ x))

    def grad_fn(x):
        margins = y * (A @ x)
        w = 1.0 / (1.0 + np.exp(margins))  # sigmoid(-margin)
        return -(A.T @ (y * w)) / m + reg * x

    def hess_vec(x, v):
        margins = y * (A @ x)
        s = 1.0 / (1.0 + np.exp(-margins))
        d = s * (1.0 - s)
        return (A.T @ (d * (A @ v))) / m + reg * v

    x = np.zeros(n) if presolve_x0 is None else np.array(presolve_x0, dtype=float)
    step = 1.0 / L
    grad_norm = np.inf
    for _ in range(200_000):
        g = grad_fn(x)
        grad_norm = np.linalg.norm(g)
        if grad_norm <= 1e-12:
            break
        x = x - step * g
    # a separable instance has no finite minimizer; keep the value estimate
    # but only claim an optimizer when the gradient target was met
    attained = grad_norm <= 1e-10 * max(1.0, L)
    return Problem(
        dim=n,
        value_fn=value_fn,
        grad_fn=grad_fn,
        smoothness=L,
        strong_convexity=float(reg),
        opt_value=value_fn(x),
        opt_point=x if attained else None,
        opt_value_estimated=True,
        hess_vec=hess_vec,
        name=f"logistic-{m}x{n}",
    )


_SCHEMA = {
    "quadratic": {"matrix", "x_star"},
    "tridiagonal": {"n"},
    "piecewise2d": set(),
    "logistic": {"features", "labels", "reg"},
}


def load_problem(path: str) -> Problem:
    """Load a problem from a JSON file.

    The file is an object with a ``kind`` field selecting the generator and
    the generator's arguments as further fields; matrices are dense
    row-major lists of rows.
    """
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"parse error at line {exc.lineno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ValueError("problem file must contain a JSON object")
    kind = data.get("kind")
    if kind not in _SCHEMA:
        raise ValueError(
            f"unknown kind {kind!r}; expected one of {sorted(_SCHEMA)}"
        )
    required = _SCHEMA[kind]
    fields = set(data) - {"kind"}
    unexpected = fields - required
    if unexpected:
        raise ValueError(
            f"unexpected field {sorted(unexpected)[0]!r} for kind {kind!r}"
        )
    missing = required - fields
    if missing:
        raise ValueError(f"missing field {sorted(missing)[0]!r} for kind {kind!r}")
    if kind == "quadratic":
        return make_quadratic(data["matrix"], data["x_star"])
    if kind == "tridiagonal":
        n = data["n"]
        if not isinstance(n, int) or n < 2:
            raise ValueError(f"malformed field 'n': expected integer >= 2, got {n!r}")
        return make_tridiagonal(n)
    if kind == "piecewise2d":
        return make_piecewise_quadratic()
    return make_logistic(data["features"], data["labels"], data["reg"])


class SublevelRadius(NamedTuple):
    value: float
    is_exact: bool


def sublevel_radius(problem: Problem, x1, bound: Optional[float] = None) -> SublevelRadius:
    """Largest distance to the optimizer over the f(x1)-sublevel set.

    For strongly convex quadratics the returned value sqrt(2 gap / mu) is
    the exact maximum; for other strongly convex problems it is an upper
    bound and flagged as such.  Without strong convexity a caller-supplied
    bound is required.
    """
    if problem.opt_value is None or problem.opt_point is None:
        raise ValueError("sublevel radius needs both the optimal value and an optimizer")
    if problem.strong_convexity <= 0:
        if bound is not None:
            return SublevelRadius(float(bound), False)
        raise ValueError(
            "sublevel radius undefined without strong convexity; supply a bound"
        )
    gap = problem.value(np.asarray(x1, dtype=float)) - problem.opt_value
    gap = max(gap, 0.0)
    radius = float(np.sqrt(2.0 * gap / problem.strong_convexity))
    is_quadratic = problem.hessian_at_opt is not None and problem.hessian_lipschitz == 0.0
    return SublevelRadius(radius, is_quadratic)
