"""Numerical laboratory for score-mismatched zero-shot DDPM samplers on linear inverse problems."""

__version__ = "0.1.0"

from .errors import ConfigError, NumericalGuardError, SmlbError
from .linear_model import LinearObservation, pinv, sigma_t0y
from .schedules import NoiseSchedule, coefficient_sum, make_constant, make_exp_then_const, sigma_t
from .targets import GaussianTarget, MixtureTarget, correlated_covariance
from .samplers import SamplerSpec, f_ty, propagate_affine, reverse_step, run_reverse
from .analysis import (
    KLEstimate,
    MismatchReport,
    delta_ty,
    expected_delta_sq,
    gaussian_kl,
    kl_target_vs_sampler,
    knn_kl,
    w_bias,
)
