"""Ground-truth multipath channels and noisy pilot observations."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .otfs import OtfsConfig, cddpm_columns, upsilon_matrix

SPEED_OF_LIGHT = 3e8

__all__ = [
    "PathSet",
    "ScenarioConfig",
    "Observation",
    "make_rng",
    "psnr_to_sigma2",
    "draw_channel",
    "simulate_observation",
    "assemble_channel_matrix",
    "MAX_DENSE_MN",
]

# Largest frame for which the MN x MN channel matrix may be materialized.
MAX_DENSE_MN = 4096


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Philox-backed generator for the substream ``(seed, *keys)``.

    Philox is counter based, so every ``(seed, keys)`` tuple names an
    independent stream that is reproducible across platforms and workers.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, keys)])))


@dataclass
class PathSet:
    """Per-path delays (s), Dopplers (Hz) and complex gains."""

    taus: np.ndarray = field(default_factory=lambda: np.zeros(0))
    nus: np.ndarray = field(default_factory=lambda: np.zeros(0))
    gains: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))

    def __post_init__(self):
        self.taus = np.atleast_1d(np.asarray(self.taus, dtype=float))
        self.nus = np.atleast_1d(np.asarray(self.nus, dtype=float))
        self.gains = np.atleast_1d(np.asarray(self.gains, dtype=complex))
        if not (self.taus.shape == self.nus.shape == self.gains.shape) or self.taus.ndim != 1:
            raise ValueError("taus, nus and gains must be 1-D arrays of equal length")
        if np.any(self.taus < 0):
            raise ValueError("path delays must be non-negative")
        if not np.all(np.isfinite(self.gains)):
            raise ValueError("path gains must be finite")

    def __len__(self):
        return len(self.taus)

    def sorted_by_delay(self) -> "PathSet":
        order = np.argsort(self.taus, kind="stable")
        return PathSet(self.taus[order], self.nus[order], self.gains[order])


@dataclass(frozen=True)
class ScenarioConfig:
    """Four-path high-IPI scenario with exponential PDP and Jakes Dopplers."""

    fixed_delays: tuple = (0.0, 2.3e-6, 3.15e-6, 7.7e-6)
    pdp_time_constant: float = 10e-6
    max_delay: float = 10e-6
    v_ue: float = 190.0
    seed: int = 0
    num_realizations: int = 100

    def __post_init__(self):
        object.__setattr__(self, "fixed_delays", tuple(float(t) for t in self.fixed_delays))
        if any(t < 0 or t > self.max_delay for t in self.fixed_delays):
            raise ValueError(f"fixed delays must lie in [0, {self.max_delay}]")
        if self.v_ue < 0:
            raise ValueError("v_ue must be non-negative")
        if self.pdp_time_constant <= 0:
            raise ValueError("pdp_time_constant must be positive")
        if self.num_realizations < 1:
            raise ValueError("num_realizations must be >= 1")

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["fixed_delays"] = list(self.fixed_delays)
        return d

    def max_doppler(self, cfg: OtfsConfig) -> float:
        return self.v_ue / SPEED_OF_LIGHT * cfg.f_c


@dataclass
class Observation:
    y: np.ndarray
    sigma2: float
    psnr_db: float


def psnr_to_sigma2(cfg: OtfsConfig, psnr_db: float) -> float:
    """Noise variance giving pilot SNR ``E_p / (MN sigma2)`` of `psnr_db` dB."""
    return cfg.E_p / (cfg.MN * 10.0 ** (psnr_db / 10.0))


def draw_channel(scen: ScenarioConfig, cfg: OtfsConfig, rng: np.random.Generator) -> PathSet:
    """One Rayleigh realization of the scenario.

    Gains are zero-mean circular Gaussian with variances following the
    exponential PDP, scaled so the expected total power is one. Dopplers are
    ``nu_max cos(theta)`` with ``theta ~ U[0, 2 pi)``.
    """
    taus = np.sort(np.asarray(scen.fixed_delays, dtype=float))
    power = np.exp(-taus / scen.pdp_time_constant)
    power /= power.sum()
    P = len(taus)
    gains = np.sqrt(power / 2) * (rng.standard_normal(P) + 1j * rng.standard_normal(P))
    theta = rng.uniform(0.0, 2 * np.pi, P)
    nus = scen.max_doppler(cfg) * np.cos(theta)
    return PathSet(taus, nus, gains)


def noiseless_observation(cfg: OtfsConfig, channel: PathSet) -> np.ndarray:
    if len(channel) == 0:
        return np.zeros(cfg.MN, dtype=complex)
    return channel.gains @ cddpm_columns(cfg, channel.taus, channel.nus)


def simulate_observation(
    cfg: OtfsConfig, channel: PathSet, sigma2: float, rng: np.random.Generator
) -> Observation:
    """``y = sum_i alpha_i r(tau_i, nu_i) + n`` with ``n ~ CN(0, sigma2 I)``.

    ``sigma2 == 0`` gives a noiseless observation with infinite PSNR.
    """
    if len(channel) == 0:
        raise ValueError("channel must contain at least one path")
    if sigma2 < 0:
        raise ValueError("sigma2 must be non-negative")
    y = noiseless_observation(cfg, channel)
    noise = math.sqrt(sigma2 / 2) * (rng.standard_normal(cfg.MN) + 1j * rng.standard_normal(cfg.MN))
    psnr_db = 10 * math.log10(cfg.E_p / (cfg.MN * sigma2)) if sigma2 > 0 else math.inf
    return Observation(y + noise, float(sigma2), psnr_db)


def assemble_channel_matrix(cfg: OtfsConfig, channel: PathSet) -> np.ndarray:
    """Dense ``H_dd = sum_i alpha_i Upsilon(tau_i, nu_i)``.

    Refuses frames with ``MN > MAX_DENSE_MN``; use
    :func:`fracdd.metrics.nmse_paths` there instead.
    """
    if cfg.MN > MAX_DENSE_MN:
        raise MemoryError(
            f"refusing to materialize a {cfg.MN}x{cfg.MN} channel matrix; "
            "use metrics.nmse_paths for column-wise evaluation"
        )
    H = np.zeros((cfg.MN, cfg.MN), dtype=complex)
    for tau, nu, g in zip(channel.taus, channel.nus, channel.gains):
        H += g * upsilon_matrix(cfg, tau, nu)
    return H
