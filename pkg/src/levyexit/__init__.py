"""Mean first exit times of jump-diffusions from a potential well in the small-noise limit."""
from ._backend import DEFAULT as DEFAULT_BACKEND
from .asymptotics import (ScalingFit, fit_model, fit_scaling_law, predict_mean_exit,
                          stable_exit_prefactor, stable_limit_mass)
from .conditions import (ConditionReport, ScaleFunction, check_condition_A, check_condition_B,
                         check_condition_C, check_condition_D, check_condition_E, limit_tail,
                         scaled_tail_ratio)
from .dynamics import Domain, Potential, deterministic_flow, in_gdelta, simulate_exit_path
from .dynkin import SolverGrid, assemble_generator_matrix, solve_mean_exit_bvp
from .errors import (CensoringError, ConfigError, DiscretizationFailure, LevyExitError,
                     NumericalFailure)
from .estimator import ExitExperimentConfig, ExitTimeEstimate, estimate_mean_exit, sweep
from .measures import (JumpMeasure, LevyTriplet, characteristic_exponent, custom_measure,
                       log_perturbed_stable_measure, scale_triplet, stable_measure, tail_mass,
                       truncated_moment2)
from .rng import RngStream
from .sampling import NoiseSampler, validate_sampler

__version__ = "0.1.0"
