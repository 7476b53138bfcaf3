"""Nonstationary component analysis with fetal ECG extraction tooling."""

from .errors import InsufficientStatistics, NscaError, ValidationError
from .evaluation import MixtureConfig, add_noise, generate_mixture
from .pipeline import PipelineConfig, build_fetal_epochs, rank_components, run_nsca
from .separation import ajd, amari_index, apply_transform, gevd
from .signal import EpochSet, MultichannelSignal, covariance_full, covariance_on_epochs

__all__ = [
    "EpochSet",
    "InsufficientStatistics",
    "MixtureConfig",
    "MultichannelSignal",
    "NscaError",
    "PipelineConfig",
    "ValidationError",
    "add_noise",
    "ajd",
    "amari_index",
    "apply_transform",
    "build_fetal_epochs",
    "covariance_full",
    "covariance_on_epochs",
    "generate_mixture",
    "gevd",
    "rank_components",
    "run_nsca",
]
