"""Fractional delay-Doppler channel estimation for OTFS pilot frames.

Exact and surrogate-accelerated parallel interference cancellation
estimators, the kernel that maps a single DD path to its pilot response,
and tooling for training, sweeps and latency benchmarks.
"""

from .channel import PathSet, ScenarioConfig, draw_channel, make_rng, psnr_to_sigma2, simulate_observation
from .dl_pipic import NeuralColumns, dl_estimate
from .estimators import DLPIPIC, PIPIC
from .metrics import avg_paths, nmse, nmse_db
from .modelio import ModelFormatError, load_model, save_model
from .neural import CddpmSurrogate, FnnModel, NormalizationSpec, PredictorPair, TrainConfig
from .otfs import OtfsConfig, cddpm_column_exact, cddpm_columns, isfft, sfft, upsilon_matrix
from .pipic import EstimateState, EstimatorConfig, ExactColumns, estimate

__version__ = "0.1.0"

__all__ = [
    "OtfsConfig",
    "cddpm_column_exact",
    "cddpm_columns",
    "upsilon_matrix",
    "isfft",
    "sfft",
    "PathSet",
    "ScenarioConfig",
    "draw_channel",
    "simulate_observation",
    "psnr_to_sigma2",
    "make_rng",
    "EstimatorConfig",
    "EstimateState",
    "ExactColumns",
    "estimate",
    "NeuralColumns",
    "dl_estimate",
    "PIPIC",
    "DLPIPIC",
    "FnnModel",
    "PredictorPair",
    "NormalizationSpec",
    "TrainConfig",
    "CddpmSurrogate",
    "save_model",
    "load_model",
    "ModelFormatError",
    "nmse",
    "nmse_db",
    "avg_paths",
]
