"""SGD under arbitrary sampling for structured nonconvex finite sums.

Problems with certified structure (PL, quasar convexity, interpolation),
sampling vectors and their noise constants, step-size schedules, a seeded
experiment engine and the matching convergence bounds.
"""

from .problems import (FiniteSumProblem, StructureCert, certify_interpolation, certify_pl,
                       certify_quasar, default_points, finite_diff_check, make_composition,
                       make_least_squares, make_nonlinear_lsq, make_sin_squared,
                       random_least_squares)
from .sampling import (RngStream, SampleDraw, SamplingScheme, draw, enumerate_support,
                       stoch_grad, stoch_loss)
from .constants import (ConstantsReport, calL_independent, calL_minibatch, cLmax_minibatch,
                        constants_report, estimate_condition, hierarchy_check, rho_bruteforce,
                        rho_minibatch, sigma_constants, variance_decomposition)
from .stepsize import StepSchedule, derive_schedule, gamma_at
from .engine import AggregateRun, RunConfig, Trajectory, run_many, run_sgd
from .bounds import (BoundCurve, BoundParams, bound_curve, bound_noninterp_minibatch, bound_pl,
                     bound_quasar, bound_quasar_strong, bound_sps, iteration_complexity,
                     optimal_b, total_complexity)

__all__ = [
    "FiniteSumProblem", "StructureCert", "certify_interpolation", "certify_pl",
    "certify_quasar", "default_points", "finite_diff_check", "make_composition",
    "make_least_squares", "make_nonlinear_lsq", "make_sin_squared", "random_least_squares",
    "RngStream", "SampleDraw", "SamplingScheme", "draw", "enumerate_support", "stoch_grad",
    "stoch_loss", "ConstantsReport", "calL_independent", "calL_minibatch", "cLmax_minibatch",
    "constants_report", "estimate_condition", "hierarchy_check", "rho_bruteforce",
    "rho_minibatch", "sigma_constants", "variance_decomposition", "StepSchedule",
    "derive_schedule", "gamma_at", "AggregateRun", "RunConfig", "Trajectory", "run_many",
    "run_sgd", "BoundCurve", "BoundParams", "bound_curve", "bound_noninterp_minibatch",
    "bound_pl", "bound_quasar", "bound_quasar_strong", "bound_sps", "iteration_complexity",
    "optimal_b", "total_complexity",
]

__version__ = "0.1.0"
