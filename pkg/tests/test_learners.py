import math

import numpy as np
import pytest

import osgm.stepsize as sz
from osgm import (
    LearnerState,
    RegretTracker,
    Schedule,
    adagrad_step,
    default_schedule,
    make_quadratic,
    make_tridiagonal,
    ogd_step,
    ratio_feedback,
    update_regret,
)
from osgm.learners import clamp_schedule


def _state(alpha=1.0, eta=0.5, cset=None, method="ogd"):
    return LearnerState(
        method=method,
        stepsize=sz.scalar_stepsize(alpha, 1),
        candidate_set=cset or sz.unconstrained(),
        schedule=Schedule("constant", eta),
    )


def test_ogd_zero_gradient_no_move():
    state = _state()
    out = ogd_step(state, 0.0)
    assert out.stepsize.value == state.stepsize.value
    assert out.iteration == 2


def test_ogd_arithmetic():
    out = ogd_step(_state(alpha=1.0, eta=0.5), 2.0)
    assert out.stepsize.value == pytest.approx(0.0)


def test_ogd_projection_after_step():
    out = ogd_step(_state(alpha=0.1, eta=0.5, cset=sz.box(0.0, 1.0)), 0.8)
    assert out.stepsize.value == pytest.approx(0.0)  # raw step lands at -0.3


def test_horizon_schedule_requires_horizon():
    state = _state()
    state = LearnerState(
        method="ogd",
        stepsize=state.stepsize,
        candidate_set=state.candidate_set,
        schedule=Schedule("horizon_sqrt", 1.0),
    )
    with pytest.raises(ValueError, match="horizon"):
        ogd_step(state, 1.0)


def test_adagrad_first_step_rate():
    eta, eps = 0.5, 1e-12
    out = adagrad_step(_state(alpha=1.0, eta=eta, method="adagrad"), 2.0)
    assert out.stepsize.value == pytest.approx(1.0 - eta * 2.0 / (2.0 + eps))


def test_adagrad_constant_gradient_sqrt_decay():
    state = _state(alpha=0.0, eta=1.0, method="adagrad")
    g = 3.0
    values = []
    for k in range(1, 30):
        new = adagrad_step(state, g)
        values.append(state.stepsize.value - new.stepsize.value)
        state = new
    # accumulator after k identical gradients is k g^2, so steps decay 1/sqrt(k)
    for k, move in enumerate(values, start=1):
        assert move == pytest.approx(1.0 * g / (math.sqrt(k) * g + 1e-12), rel=1e-9)


def test_adagrad_zero_gradient_no_change():
    state = _state(alpha=0.7, method="adagrad")
    out = adagrad_step(state, 0.0)
    assert out.stepsize.value == 0.7
    assert out.accumulator == 0.0


def test_adagrad_effective_rate_nonincreasing():
    rng = np.random.default_rng(0)
    state = LearnerState(
        method="adagrad",
        stepsize=sz.diag_stepsize(np.zeros(3)),
        candidate_set=sz.unconstrained(),
        schedule=Schedule("constant", 0.3),
    )
    prev_rate = np.full(3, np.inf)
    for _ in range(40):
        state = adagrad_step(state, rng.standard_normal(3))
        rate = 0.3 / (np.sqrt(state.accumulator) + state.eps)
        assert np.all(rate <= prev_rate + 1e-15)
        prev_rate = rate


def test_default_schedule_lookahead_ratio():
    p = make_quadratic(np.diag([2.0, 2.0]), np.zeros(2))  # L = 2
    s = default_schedule("ratio", "lookahead", p, sz.unconstrained())
    assert s.kind == "constant" and s.base == pytest.approx(1.0 / 8.0)


def test_default_schedule_monotone_lookahead_hyper():
    p = make_quadratic(np.diag([4.0, 4.0]), np.zeros(2))  # L = 4
    s = default_schedule("hypergradient", "monotone_lookahead", p, sz.unconstrained())
    assert s.kind == "constant" and s.base == pytest.approx(0.25)


def test_default_schedule_vanilla_ratio_anytime():
    p = make_quadratic(np.eye(2), np.zeros(2))  # L = 1
    cset = sz.box(0.0, 1.0 / math.sqrt(2.0))  # diam in the diag embedding = 1
    s = default_schedule("ratio", "vanilla", p, cset, pattern="diag")
    assert s.kind == "anytime_sqrt"
    assert s.base == pytest.approx(0.25)
    assert s.eta(4) == pytest.approx(1.0 / 8.0)


def test_default_schedule_needs_diameter():
    p = make_quadratic(np.eye(2), np.zeros(2))
    with pytest.raises(ValueError, match="bounded candidate set"):
        default_schedule("ratio", "vanilla", p, sz.unconstrained())


def test_schedule_sequences_nonincreasing():
    for s in (
        Schedule("constant", 0.3),
        Schedule("horizon_sqrt", 1.0, horizon=50),
        Schedule("anytime_sqrt", 1.0),
    ):
        etas = [s.eta(k) for k in range(1, 60)]
        assert all(a >= b for a, b in zip(etas, etas[1:]))


def test_clamp_schedule_never_increases_eta():
    state = _state(eta=0.1)
    revised = clamp_schedule(state, Schedule("constant", 0.5))
    assert revised.schedule.eta(revised.iteration) <= 0.1 + 1e-15
    relaxed = clamp_schedule(state, Schedule("constant", 0.05))
    assert relaxed.schedule.eta(relaxed.iteration) == pytest.approx(0.05)


def _run_scalar_regret(K=10, eta=0.05):
    """Scalar-pattern run on a 1-d quadratic with full bookkeeping."""
    p = make_quadratic(np.array([[2.0]]), np.zeros(1))
    x = np.array([1.5])
    p1 = sz.scalar_stepsize(0.1, 1)
    bench = sz.scalar_stepsize(0.5, 1)  # the inverse Hessian, r = 0
    tracker = RegretTracker(p1, constant_eta=eta)
    tracker.register_benchmark("hessian_inverse", bench)
    tracker.register_benchmark("start", p1)
    tracker.register_sequence("const_seq")
    state = LearnerState(
        method="ogd", stepsize=p1, candidate_set=sz.unconstrained(),
        schedule=Schedule("constant", eta),
    )
    for _ in range(K):
        if p.value(x) <= 1e-12:
            break
        sample = ratio_feedback(p, x, state.stepsize)
        grad = sz.contract_gradient(sample, "scalar")
        new_state = ogd_step(state, grad)
        bench_vals = {
            "hessian_inverse": (p.value(x - bench.apply(sample.grad_at_x)) - 0.0) / sample.denom,
            "start": (p.value(x - p1.apply(sample.grad_at_x)) - 0.0) / sample.denom,
        }
        update_regret(
            tracker,
            sample,
            benchmarks=bench_vals,
            sequences={"const_seq": (bench, bench_vals["hessian_inverse"])},
            p_before=state.stepsize,
            p_after=new_state.stepsize,
            eta=eta,
            grad_native_sq=grad * grad,
        )
        x = sample.proposal
        state = new_state
    return tracker


def test_regret_constant_sequence_zero_path_length():
    tracker = _run_scalar_regret()
    assert tracker.sequences["const_seq"].path_length == 0.0


def test_regret_per_step_and_static_inequalities():
    tracker = _run_scalar_regret()
    for track in tracker.benchmarks.values():
        assert track.per_step_worst >= -1e-10
        assert track.static_worst >= -1e-10
    assert tracker.sequences["const_seq"].dynamic_worst >= -1e-10


def test_regret_benchmark_equal_start_with_zero_gradients():
    p1 = sz.scalar_stepsize(0.2, 1)
    tracker = RegretTracker(p1, constant_eta=0.1)
    tracker.register_benchmark("start", p1)

    class Dummy:
        value = 0.4
        grad_at_proposal = np.zeros(1)
        grad_at_x = np.zeros(1)
        denom = 1.0

    for _ in range(5):
        tracker.update(
            Dummy(),
            p_before=p1,
            p_after=p1,
            eta=0.1,
            grad_native_sq=0.0,
            benchmark_values={"start": 0.4},
        )
    track = tracker.benchmarks["start"]
    assert track.cumulative == pytest.approx(tracker.cumulative_feedback)
    assert track.per_step_worst == pytest.approx(0.0)


def test_regret_flags_benchmark_outside_set():
    p1 = sz.scalar_stepsize(0.2, 1)
    tracker = RegretTracker(p1)
    tracker.register_benchmark("outside", sz.scalar_stepsize(5.0, 1), in_set=False)
    assert not tracker.benchmarks["outside"].in_set


def test_eta_never_increases_along_run():
    p = make_tridiagonal(8)
    s = default_schedule("ratio", "monotone", p, sz.box(0.0, 0.5), pattern="diag")
    etas = [s.eta(k) for k in range(1, 200)]
    assert all(a >= b for a, b in zip(etas, etas[1:]))
