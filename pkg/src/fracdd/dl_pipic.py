"""P-IPIC with surrogate-predicted columns inside every argmax."""

from __future__ import annotations

from functools import cached_property

import numpy as np

from .otfs import OtfsConfig, cddpm_columns
from .pipic import EstimateState, EstimatorConfig, coarse_grid, estimate

__all__ = ["NeuralColumns", "ExactOraclePredictor", "dl_estimate"]


class NeuralColumns:
    """Column source that asks a predictor (``.columns(taus, nus)``) for columns.

    The integer-grid predictions do not depend on the residue and are
    computed once.
    """

    def __init__(self, predictor, cfg: OtfsConfig):
        self.predictor = predictor
        self.cfg = cfg

    def columns(self, taus, nus) -> np.ndarray:
        return self.predictor.columns(taus, nus)

    @cached_property
    def _coarse(self) -> np.ndarray:
        cols = self.columns(*coarse_grid(self.cfg))
        cols.setflags(write=False)
        return cols

    def coarse_columns(self) -> np.ndarray:
        return self._coarse


class ExactOraclePredictor:
    """Stand-in predictor returning exact columns; bypasses the networks."""

    def __init__(self, cfg: OtfsConfig):
        self.cfg = cfg

    def columns(self, taus, nus) -> np.ndarray:
        return cddpm_columns(self.cfg, taus, nus)


def dl_estimate(
    y, cfg: OtfsConfig, est_cfg: EstimatorConfig | None, pair, sigma2: float = 0.0
) -> EstimateState:
    """DL-based P-IPIC.

    `pair` is a :class:`~fracdd.neural.PredictorPair` (or anything with the
    same ``columns`` method). Detected paths still get exact columns, so at
    most ``2 * P_max`` exact evaluations happen per call.
    """
    pair_cfg = getattr(pair, "cfg", cfg)
    if (pair_cfg.M, pair_cfg.N) != (cfg.M, cfg.N):
        raise ValueError(f"predictor trained for M={pair_cfg.M}, N={pair_cfg.N}; frame is M={cfg.M}, N={cfg.N}")
    return estimate(y, cfg, est_cfg, NeuralColumns(pair, cfg), sigma2)
