import numpy as np
import pytest

import osgm.stepsize as sz
from osgm import make_random_quadratic, ratio_feedback


def test_apply_scalar():
    s = sz.scalar_stepsize(2.0, 2)
    assert np.allclose(s.apply(np.array([1.0, -1.0])), [2.0, -2.0])


def test_apply_diag_zero_entry():
    s = sz.diag_stepsize([1.0, 0.0])
    assert np.allclose(s.apply(np.array([5.0, 7.0])), [5.0, 0.0])


def test_apply_full_matches_triple_loop():
    rng = np.random.default_rng(0)
    P = rng.standard_normal((6, 6))
    g = rng.standard_normal(6)
    naive = np.zeros(6)
    for i in range(6):
        for j in range(6):
            naive[i] += P[i, j] * g[j]
    assert np.max(np.abs(sz.full_stepsize(P).apply(g) - naive)) < 1e-14


def test_apply_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension mismatch"):
        sz.diag_stepsize([1.0, 2.0]).apply(np.ones(3))


def test_frobenius_norm_scalar_embedding():
    s = sz.scalar_stepsize(-0.5, 9)
    assert s.frobenius_norm() == pytest.approx(0.5 * 3.0)
    assert np.linalg.norm(s.as_matrix()) == pytest.approx(s.frobenius_norm())


def _sample(pattern="full", n=4, seed=1):
    problem = make_random_quadratic(n, cond=6.0, seed=seed)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    if pattern == "scalar":
        P = sz.scalar_stepsize(0.2, n)
    elif pattern == "diag":
        P = sz.diag_stepsize(0.2 * rng.random(n))
    else:
        P = sz.full_stepsize(0.2 * rng.standard_normal((n, n)))
    return ratio_feedback(problem, x, P)


def test_contract_orthogonal_gradients_scalar():
    class Sample:
        grad_at_proposal = np.array([1.0, 0.0])
        grad_at_x = np.array([0.0, 3.0])
        denom = 2.0

    assert sz.contract_gradient(Sample(), "scalar") == 0.0


def test_contract_diag_elementwise():
    class Sample:
        grad_at_proposal = np.array([1.0, 1.0])
        grad_at_x = np.array([1.0, 1.0])
        denom = 2.0

    assert np.allclose(sz.contract_gradient(Sample(), "diag"), [-0.5, -0.5])


def test_contract_full_outer_product():
    rng = np.random.default_rng(2)
    sample = _sample("full", seed=3)
    G = sz.contract_gradient(sample, "full")
    for i in range(4):
        for j in range(4):
            expected = -sample.grad_at_proposal[i] * sample.grad_at_x[j] / sample.denom
            assert G[i, j] == pytest.approx(expected, abs=1e-15)


def test_contract_diag_equals_full_diagonal():
    sample = _sample("diag", seed=4)
    full = sz.contract_gradient(sample, "full")
    diag = sz.contract_gradient(sample, "diag")
    assert np.max(np.abs(np.diag(full) - diag)) == 0.0


def test_project_box_clamps():
    cset = sz.box(0.0, 1.0)
    out = cset.project(sz.diag_stepsize([-0.5, 2.0]))
    assert np.allclose(out.value, [0.0, 1.0])


def test_project_unconstrained_identity():
    s = sz.full_stepsize(np.random.default_rng(5).standard_normal((3, 3)))
    assert sz.unconstrained().project(s) is s


def test_project_ball_matches_grid_search():
    rng = np.random.default_rng(6)
    center = sz.diag_stepsize(np.zeros(2))
    cset = sz.frobenius_ball(center, 1.0)
    P = sz.diag_stepsize(np.array([1.5, 1.2]))
    proj = cset.project(P)
    # grid search over the disc for the closest point
    best, best_d = None, np.inf
    for a in np.linspace(-1, 1, 401):
        for b in np.linspace(-1, 1, 401):
            if a * a + b * b <= 1.0:
                d = (a - 1.5) ** 2 + (b - 1.2) ** 2
                if d < best_d:
                    best, best_d = (a, b), d
    assert np.allclose(proj.value, best, atol=5e-3)
    assert sz.distance(P, proj) <= np.sqrt(best_d) + 1e-9


def test_projection_idempotent_and_nonexpansive():
    rng = np.random.default_rng(7)
    sets = [
        sz.box(-0.3, 0.8),
        sz.nonnegative(),
        sz.frobenius_ball(sz.full_stepsize(np.zeros((3, 3))), 0.7),
    ]
    for _ in range(200):
        cset = sets[rng.integers(len(sets))]
        pattern = "full" if cset.kind == "frobenius_ball" else ("scalar", "diag", "full")[rng.integers(3)]
        if pattern == "scalar":
            P = sz.scalar_stepsize(rng.standard_normal() * 2, 3)
            Q = cset.project(sz.scalar_stepsize(rng.standard_normal(), 3))
        elif pattern == "diag":
            P = sz.diag_stepsize(rng.standard_normal(3) * 2)
            Q = cset.project(sz.diag_stepsize(rng.standard_normal(3)))
        else:
            P = sz.full_stepsize(rng.standard_normal((3, 3)) * 2)
            Q = cset.project(sz.full_stepsize(rng.standard_normal((3, 3))))
        proj = cset.project(P)
        assert sz.distance(cset.project(proj), proj) <= 1e-12
        assert sz.distance(proj, Q) <= sz.distance(P, Q) + 1e-12


def test_scalar_embedding_apply_consistency():
    rng = np.random.default_rng(8)
    g = rng.standard_normal(5)
    s = sz.scalar_stepsize(0.37, 5)
    full = sz.full_stepsize(s.as_matrix())
    assert np.max(np.abs(s.apply(g) - full.apply(g))) < 1e-15


def test_box_diam_embedding():
    cset = sz.box(0.0, 1.0)
    assert cset.diam("scalar", 4) == pytest.approx(2.0)
    assert cset.diam("diag", 4) == pytest.approx(2.0)
    assert cset.diam("full", 4) == pytest.approx(4.0)
    assert sz.unconstrained().diam("full", 4) is None


def test_empty_box_rejected():
    with pytest.raises(ValueError, match="empty box"):
        sz.box(1.0, 0.0)
