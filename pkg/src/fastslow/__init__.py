"""Fast-slow systems through level-2 lifts.

Simulate a slow variable driven by a fast chaotic or stochastic driver,
build its level-2 lift, measure Hölder and p-variation seminorms, certify
sewing and a-priori bounds, and compare against the limiting diffusion.
"""

from . import coefficients, diffusion, drivers, experiments, lift, norms, sewing, slow_motion
from .coefficients import CoefficientField, field_from_config, make_field
from .diffusion import DiffusionPath, solve_sde
from .drivers import CoupledNoise, DriverPath, estimate_cov, estimate_gamma, gen_coupled, gen_driver
from .errors import (BoxExitError, ConfigurationError, ContractViolation, DegenerateInputError,
                     DimensionError, EvaluationError, FastSlowError, FitError, RangeError)
from .experiments import (ExperimentConfig, block_lipschitz_check, fit_rate, run_coupled_convergence,
                          run_weak_comparison, variational_transfer_check)
from .grid import TimeGrid
from .lift import Level2Path, chen_residual, lift_brownian, lift_continuous, lift_discrete
from .norms import holder, modified_holder, p_variation, windowed_holder
from .sewing import BoundReport, proof_constants, sewing_residual
from .slow_motion import SlowPath, simulate_continuous, simulate_discrete

__version__ = "0.1.0"
