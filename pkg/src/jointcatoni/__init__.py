"""Joint Catoni-type estimation of trend and scale under heavy-tailed noise."""

from .errors import (ConfigError, DesignError, FormatError, InputError,
                     JointCatoniError, NumericError)
from .influence import NARROW, WIDE, InfluenceSpec, Variant, eval_psi1, eval_psi2, mixed
from .solver import SolveDiagnostics, SolveOptions
from .estimators import (TuningParams, adaptive_huber, catoni_mean,
                         catoni_mean_sample_sigma, gram_summary, huber_tau,
                         joint_mean_variance, joint_regression, joint_ridge, ols,
                         ridge_ls, sample_mean_var)
from .datagen import LinearModelSpec, NoiseSpec, gen_linear_data, kurtosis, sample_noise
from .harness import ExperimentConfig, run_parameter_sweep, run_quantile_experiment

__all__ = [
    "ConfigError", "DesignError", "FormatError", "InputError", "JointCatoniError",
    "NumericError", "NARROW", "WIDE", "InfluenceSpec", "Variant", "eval_psi1",
    "eval_psi2", "mixed", "SolveDiagnostics", "SolveOptions", "TuningParams",
    "adaptive_huber", "catoni_mean", "catoni_mean_sample_sigma", "gram_summary",
    "huber_tau", "joint_mean_variance", "joint_regression", "joint_ridge", "ols",
    "ridge_ls", "sample_mean_var", "LinearModelSpec", "NoiseSpec", "gen_linear_data",
    "kurtosis", "sample_noise", "ExperimentConfig", "run_parameter_sweep",
    "run_quantile_experiment",
]

__version__ = "0.1.0"
