"""Estimation quality metrics."""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from .channel import PathSet
from .otfs import OtfsConfig, cddpm_columns

__all__ = ["nmse", "nmse_db", "nmse_paths", "avg_paths", "to_db"]


def to_db(x: float) -> float:
    return 10.0 * math.log10(x) if x > 0 else -math.inf


def nmse(H_true, H_est) -> float:
    """``||H_true - H_est||_F^2 / ||H_true||_F^2``."""
    H_true = np.asarray(H_true)
    denom = np.vdot(H_true, H_true).real
    if denom <= 0:
        raise ValueError("true channel is identically zero")
    diff = H_true - np.asarray(H_est)
    return float(np.vdot(diff, diff).real / denom)


def nmse_db(H_true, H_est) -> float:
    return to_db(nmse(H_true, H_est))


def _kernel_column_block(cfg: OtfsConfig, paths: PathSet, k2: int, l2: int) -> np.ndarray:
    # Column (k2, l2) of sum_i a_i Upsilon_i is the CDDPM column of a unit
    # pilot placed in that cell.
    if len(paths) == 0:
        return np.zeros(cfg.MN, dtype=complex)
    unit = replace(cfg, m_p=l2, n_p=k2, E_p=1.0)
    return paths.gains @ cddpm_columns(unit, paths.taus, paths.nus)


def nmse_paths(cfg: OtfsConfig, true_paths: PathSet, est_paths: PathSet) -> float:
    """NMSE between two path sets, streamed one kernel column at a time.

    Memory stays ``O(MN)`` so it works for frames too large for
    :func:`~fracdd.channel.assemble_channel_matrix`.
    """
    num = 0.0
    den = 0.0
    for k2 in range(cfg.N):
        for l2 in range(cfg.M):
            h = _kernel_column_block(cfg, true_paths, k2, l2)
            d = h - _kernel_column_block(cfg, est_paths, k2, l2)
            num += np.vdot(d, d).real
            den += np.vdot(h, h).real
    if den <= 0:
        raise ValueError("true channel is identically zero")
    return float(num / den)


def avg_paths(counts) -> float:
    """Mean detected path count over realizations."""
    counts = list(counts)
    if not counts:
        raise ValueError("no realizations to average")
    return float(np.mean(counts))
