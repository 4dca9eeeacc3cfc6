"""Gaussian-process time-series forecasting with learned input warping."""

from .data import SynthConfig, Standardization, TimeSeries
from .errors import (
    AllRestartsFailed,
    DataError,
    KernelError,
    KernelParseError,
    NotPositiveDefinite,
    WarpGPError,
)
from .evaluate import ExperimentReport, nlpd, run_benchmark
from .gp import GramFactor, PredictiveDistribution
from .kernels import HyperVector, Kernel, parse_kernel
from .train import FitConfig, TrainedModel, fit_gp, fit_wgp, predict
from .warp import WarpPrior, WarpState, extrapolate_warp, warp_inputs

__all__ = [
    "AllRestartsFailed",
    "DataError",
    "ExperimentReport",
    "FitConfig",
    "GramFactor",
    "HyperVector",
    "Kernel",
    "KernelError",
    "KernelParseError",
    "NotPositiveDefinite",
    "PredictiveDistribution",
    "Standardization",
    "SynthConfig",
    "TimeSeries",
    "TrainedModel",
    "WarpGPError",
    "WarpPrior",
    "WarpState",
    "extrapolate_warp",
    "fit_gp",
    "fit_wgp",
    "nlpd",
    "parse_kernel",
    "predict",
    "run_benchmark",
    "warp_inputs",
]
