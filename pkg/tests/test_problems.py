import json

import numpy as np
import pytest

from osgm import (
    load_problem,
    make_logistic,
    make_piecewise_quadratic,
    make_quadratic,
    make_random_quadratic,
    make_tridiagonal,
    sublevel_radius,
)
from osgm.problems import tridiagonal_eigenvalues
from osgm.verify import witness_problems


def test_quadratic_identity_hessian():
    p = make_quadratic(np.eye(2), np.zeros(2))
    f, g = p.eval(np.array([3.0, 4.0]))
    assert f == pytest.approx(12.5)
    assert np.allclose(g, [3.0, 4.0])


def test_quadratic_diagonal_metadata():
    p = make_quadratic(np.diag([1.0, 4.0]), np.zeros(2))
    assert p.smoothness == pytest.approx(4.0)
    assert p.strong_convexity == pytest.approx(1.0)
    assert p.kappa == pytest.approx(4.0)
    assert p.kappa_star_diag == 1.0
    assert p.hessian_lipschitz == 0.0


def test_quadratic_extremes_match_power_iteration():
    # independent power-iteration oracle for the top eigenvalue
    A = np.diag([1.0, 4.0])
    p = make_quadratic(A, np.zeros(2))
    v = np.array([0.3, 0.7])
    for _ in range(200):
        v = A @ v
        v /= np.linalg.norm(v)
    top = float(v @ (A @ v))
    assert abs(top - p.smoothness) < 1e-10


def test_quadratic_rejects_asymmetric():
    with pytest.raises(ValueError, match="symmetric"):
        make_quadratic(np.array([[1.0, 0.5], [0.0, 1.0]]), np.zeros(2))


def test_quadratic_rejects_indefinite_naming_eigenvalue():
    with pytest.raises(ValueError, match="smallest eigenvalue"):
        make_quadratic(np.diag([1.0, -2.0]), np.zeros(2))


def test_tridiagonal_small_spectra():
    p3 = make_tridiagonal(3)
    expected = 4.0 * np.sin(np.pi * np.arange(1, 4) / 8.0) ** 2
    assert np.allclose(np.linalg.eigvalsh(p3.hessian_at_opt), expected, atol=1e-12)
    assert np.allclose(expected, [0.5857864376269049, 2.0, 3.414213562373095])
    p2 = make_tridiagonal(2)
    assert np.allclose(np.linalg.eigvalsh(p2.hessian_at_opt), [1.0, 3.0])


def test_tridiagonal_formula_matches_dense_eigensolver():
    p = make_tridiagonal(50)
    dense = np.linalg.eigvalsh(p.hessian_at_opt)
    assert np.max(np.abs(dense - tridiagonal_eigenvalues(50))) < 1e-10
    assert abs(p.smoothness - dense[-1]) < 1e-10
    assert abs(p.strong_convexity - dense[0]) < 1e-10


def test_tridiagonal_rejects_small_n():
    with pytest.raises(ValueError, match="n >= 2"):
        make_tridiagonal(1)


def test_piecewise_values_and_gradients():
    p = make_piecewise_quadratic()
    f, g = p.eval(np.array([2.0, 2.0]))
    assert f == pytest.approx(3.0) and np.allclose(g, [1.0, 2.0])
    f, g = p.eval(np.array([-2.0, 0.0]))
    assert f == pytest.approx(3.0) and np.allclose(g, [-3.0, 0.0])
    f, g = p.eval(np.array([0.0, 1.0]))
    assert f == pytest.approx(0.5) and np.allclose(g, [0.0, 1.0])


def test_piecewise_gradient_finite_difference():
    p = make_piecewise_quadratic()
    rng = np.random.default_rng(0)
    h = 1e-6
    for _ in range(20):
        x = rng.standard_normal(2) * 2
        if abs(x[0]) < 1e-2:
            x[0] = 0.5
        fd = np.array(
            [
                (p.value(x + [h, 0]) - p.value(x - [h, 0])) / (2 * h),
                (p.value(x + [0, h]) - p.value(x - [0, h])) / (2 * h),
            ]
        )
        assert np.linalg.norm(fd - p.grad(x)) < 1e-6


def test_logistic_zero_margin():
    rng = np.random.default_rng(1)
    p = make_logistic(rng.standard_normal((8, 3)), np.where(rng.random(8) > 0.5, 1.0, -1.0), reg=0.0)
    assert p.value(np.zeros(3)) == pytest.approx(np.log(2.0))


def test_logistic_separable_limit():
    p = make_logistic(np.array([[1.0, 0.0]]), np.array([1.0]), reg=0.0)
    assert p.value(np.array([50.0, 0.0])) < 1e-20


def test_logistic_presolve_restart_consistency():
    rng = np.random.default_rng(2)
    A = rng.standard_normal((20, 5))
    y = np.where(rng.random(20) > 0.5, 1.0, -1.0)
    p1 = make_logistic(A, y, reg=0.1)
    p2 = make_logistic(A, y, reg=0.1, presolve_x0=rng.standard_normal(5))
    assert abs(p1.opt_value - p2.opt_value) < 1e-9
    assert p1.opt_value_estimated
    assert np.linalg.norm(p1.grad(p1.opt_point)) <= 1e-10 * max(1.0, p1.smoothness)


def test_logistic_rejects_bad_labels():
    with pytest.raises(ValueError, match=r"\+1 or -1"):
        make_logistic(np.ones((2, 2)), np.array([1.0, 0.0]), reg=0.0)
    with pytest.raises(ValueError, match="dimension mismatch"):
        make_logistic(np.ones((2, 2)), np.array([1.0, -1.0, 1.0]), reg=0.0)


def test_load_problem_tridiagonal_round_trip(tmp_path):
    path = tmp_path / "p.json"
    path.write_text(json.dumps({"kind": "tridiagonal", "n": 8}))
    loaded = load_problem(str(path))
    direct = make_tridiagonal(8)
    rng = np.random.default_rng(3)
    for _ in range(5):
        x = rng.standard_normal(8)
        assert loaded.value(x) == direct.value(x)
        assert np.array_equal(loaded.grad(x), direct.grad(x))


def test_load_problem_quadratic(tmp_path):
    path = tmp_path / "q.json"
    path.write_text(json.dumps({"kind": "quadratic", "matrix": [[2.0, 0.0], [0.0, 1.0]], "x_star": [0.0, 0.0]}))
    p = load_problem(str(path))
    assert p.smoothness == pytest.approx(2.0)
    assert p.strong_convexity == pytest.approx(1.0)


def test_load_problem_names_bad_field(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"kind": "tridiagonal", "dim": 8}))
    with pytest.raises(ValueError, match="'dim'"):
        load_problem(str(path))


def test_load_problem_unknown_kind(tmp_path):
    path = tmp_path / "u.json"
    path.write_text(json.dumps({"kind": "rosenbrock"}))
    with pytest.raises(ValueError, match="unknown kind"):
        load_problem(str(path))


def test_load_problem_parse_error_reports_line(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"kind": "tridiagonal",\n  "n": }')
    with pytest.raises(ValueError, match="line 2"):
        load_problem(str(path))


def test_sublevel_radius_unit_ball():
    p = make_quadratic(np.eye(2), np.zeros(2))
    x1 = np.array([1.0, 0.0])  # f = 0.5
    r = sublevel_radius(p, x1)
    assert r.value == pytest.approx(1.0)
    assert r.is_exact


def test_sublevel_radius_ellipse_matches_grid():
    p = make_quadratic(np.diag([1.0, 4.0]), np.zeros(2))
    x1 = np.array([2.0, 0.0])  # f = 2
    r = sublevel_radius(p, x1)
    assert r.value == pytest.approx(2.0)
    # brute-force maximum of ||x|| over the sublevel ellipse
    best = 0.0
    for a in np.linspace(-2.2, 2.2, 881):
        for b in np.linspace(-1.2, 1.2, 481):
            if 0.5 * (a * a + 4 * b * b) <= 2.0 + 1e-12:
                best = max(best, np.hypot(a, b))
    assert abs(best - r.value) < 5e-3


def test_sublevel_radius_needs_strong_convexity():
    p = make_logistic(np.array([[1.0], [1.0]]), np.array([1.0, -1.0]), reg=0.0)
    with pytest.raises(ValueError, match="supply a bound"):
        sublevel_radius(p, np.array([1.0]))
    r = sublevel_radius(p, np.array([1.0]), bound=3.0)
    assert r.value == 3.0 and not r.is_exact


def test_smoothness_witness_all_builtins():
    rng = np.random.default_rng(4)
    for p in witness_problems(0):
        for _ in range(100):
            x = rng.standard_normal(p.dim) * 3
            y = rng.standard_normal(p.dim) * 3
            lhs = np.linalg.norm(p.grad(x) - p.grad(y))
            rhs = p.smoothness * np.linalg.norm(x - y)
            assert lhs <= rhs * (1 + 1e-8)


def test_quadratic_strong_convexity_lower_bound():
    rng = np.random.default_rng(5)
    p = make_random_quadratic(6, cond=40.0, seed=11)
    for _ in range(50):
        x = rng.standard_normal(6) * 2
        gap = p.value(x) - p.opt_value
        d = x - p.opt_point
        assert gap >= 0.5 * p.strong_convexity * float(d @ d) - 1e-12
    assert p.value(p.opt_point) == p.opt_value
