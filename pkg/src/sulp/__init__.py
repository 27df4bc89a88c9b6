"""Bayesian impulse-response estimation via seemingly unrelated local projections."""

from sulp.dataset import (
    DesignSpec,
    ScalingInfo,
    TimeSeriesDataset,
    build_design,
    load_csv,
    rescale_irf,
    standardize,
)
from sulp.model import SULPSystem, log_pseudo_likelihood, relevance_statistic, residuals
from sulp.priors import (
    HyperParams,
    default_hyperparameters,
    gp_kernel,
    minnesota_controls_prior,
    ng_prior_variance,
)
from sulp.sampler import Chain, SamplerConfig, run_sampler

__version__ = "0.1.0"

__all__ = [
    "Chain",
    "DesignSpec",
    "HyperParams",
    "SULPSystem",
    "SamplerConfig",
    "ScalingInfo",
    "TimeSeriesDataset",
    "build_design",
    "default_hyperparameters",
    "gp_kernel",
    "load_csv",
    "log_pseudo_likelihood",
    "minnesota_controls_prior",
    "ng_prior_variance",
    "relevance_statistic",
    "rescale_irf",
    "residuals",
    "run_sampler",
    "standardize",
]
