"""Online scaled gradient methods with runtime convergence diagnostics.

Gradient descent whose matrix stepsize is learned online from the ratio
or hypergradient feedback of each step, together with monitors that
verify the method's per-iteration inequalities and convergence bounds as
a run executes.
"""

from .diagnostics import (
    CheckRecord,
    MonitorReport,
    PotentialSpec,
    RunMonitor,
    eval_potential,
    piecewise_region_benchmark,
    summarize,
)
from .feedback import (
    FeedbackSample,
    feedback_constants,
    hypergradient_feedback,
    propose,
    ratio_feedback,
)
from .landscape import ActionOutcome, act, check_progress_inequalities, estimate_L
from .learners import (
    LearnerState,
    RegretTracker,
    Schedule,
    adagrad_step,
    default_schedule,
    ogd_step,
    update_regret,
)
from .problems import (
    Problem,
    load_problem,
    make_logistic,
    make_piecewise_quadratic,
    make_quadratic,
    make_random_quadratic,
    make_tridiagonal,
    sublevel_radius,
    with_counting,
)
from .solver import (
    ConfigError,
    SolverConfig,
    SolverTrace,
    run_gd,
    run_hdm,
    run_osgm,
    run_osgm_heavyball,
)
from .stepsize import (
    CandidateSet,
    Stepsize,
    box,
    contract_gradient,
    diag_stepsize,
    frobenius_ball,
    full_stepsize,
    nonnegative,
    project,
    scalar_stepsize,
    scaled_identity,
    unconstrained,
)

__version__ = "0.1.0"
