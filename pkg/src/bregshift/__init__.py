"""Density-ratio estimation with Bregman losses and truncated ReLU networks,
covariate-shift regression, and conditional flow sampling."""
from .bregman import BregmanKind, bregman_div, lr_objective, ls_objective, phi, weighted_sq_loss
from .core import RngStream, matmul, sample_gamma, sample_gaussian, summary
from .dre import DreConfig, build_ratio_net, eval_ratio, fit_ratio
from .flow import (LINEAR, TRIGONOMETRIC, FlowModel, GaussianOracle, InterpolantSpec, OdeConfig,
                   fit_velocity, gaussian_velocity_oracle, interpolate, sample_ode, velocity_target,
                   w2_empirical_1d)
from .kernels import backend_name
from .nn import (AdamConfig, AdamState, MlpModel, MlpParams, MlpSpec, adam_step, forward,
                 init_params, loss_and_grad, truncate)
from .scenarios import GammaShiftSpec, RegressionSpec, f0, gen_gamma_shift, gen_regression, true_ratio
from .shift import ShiftConfig, cross_validate_iters, eval_risks, fit_corrected, fit_source

__version__ = "0.1.0"
