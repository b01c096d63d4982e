"""Simulation and verification toolkit for SDEs driven by a Wiener process and a fractional Brownian motion."""

__version__ = "0.1.0"

from .errors import CholeskyError, DomainError, ResolutionError, ShapeError, SolverError
from .models import CoefficientSet, constant_model, get_model, model_names, tanh2d, trig1d, zoo
from .paths import (
    GridPath,
    HurstParam,
    fbm_covariance,
    holder_seminorm,
    sample_fbm,
    sample_fbm_paths,
    sample_wiener,
    sample_wiener_paths,
    smoothed_driver,
    substream,
    sup_norm,
)
from .sde import convergence_study, pathwise_bound_check, solve_mixed, solve_smoothed
from .young import (
    StepFunction,
    YoungConstant,
    fractional_inner_product,
    mixed_inner_product,
    young_bound,
    young_constant,
    young_integral,
)
from .malliavin import (
    derivative_field_fbm,
    derivative_field_wiener,
    directional_derivative_fd,
    duhamel_reconstruct,
    gradient_pairing_check,
    sobolev_norm_estimate,
)
from .moments import J_statistic, alpha_max, estimate_exp_moment, fernique_check, tail_gaussianity_check
