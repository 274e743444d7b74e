"""Joint Catoni estimators and the baselines they are compared against."""

from .baselines import (adaptive_huber, catoni_mean, catoni_mean_sample_sigma,
                        huber_tau, sample_mean_var)
from .design import DesignSummary, gram_summary, ols, ridge_ls
from .joint import (JointFit, LinearEquations, MeanEquations, RegressionFit,
                    joint_mean_variance, joint_regression, joint_ridge, robust_scale)
from .tuning import TuningParams

__all__ = [
    "TuningParams",
    "JointFit",
    "RegressionFit",
    "DesignSummary",
    "MeanEquations",
    "LinearEquations",
    "joint_mean_variance",
    "joint_regression",
    "joint_ridge",
    "catoni_mean",
    "catoni_mean_sample_sigma",
    "sample_mean_var",
    "ols",
    "ridge_ls",
    "huber_tau",
    "adaptive_huber",
    "gram_summary",
    "robust_scale",
]
