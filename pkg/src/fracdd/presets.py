"""Named surrogate training presets and channel scenarios.

``desk`` and ``desk-wide`` run on a laptop CPU (minutes). ``large`` and
``large-wide`` are the full M=N=16 recipes: 200k samples, 100 epochs; on a
single CPU core expect many hours per network (``large-wide`` has about
67M parameters per network).

The ``desk`` scenario is the ``default`` four-path scenario rescaled for an
M=N=8 frame: delays and delay spread are doubled so every path keeps its
position in delay bins (0, 0.92, 1.26, 3.08). Dopplers stay physical.
"""

from __future__ import annotations

from dataclasses import dataclass

from .channel import ScenarioConfig
from .neural import TrainConfig
from .otfs import OtfsConfig

__all__ = ["TrainPreset", "PRESETS", "SCENARIOS", "get_preset"]


@dataclass(frozen=True)
class TrainPreset:
    name: str
    M: int
    N: int
    L1: int
    L2: int
    train: TrainConfig

    @property
    def otfs(self) -> OtfsConfig:
        return OtfsConfig(M=self.M, N=self.N)


def _preset(name, M, N, l1_factor, l2_mult, **train):
    MN = M * N
    L1 = l1_factor * MN
    return TrainPreset(name, M, N, L1, l2_mult * L1, TrainConfig(**train))


PRESETS = {
    p.name: p
    for p in (
        _preset("desk", 8, 8, 8, 1, num_samples=50_000, epochs=30, batch=250),
        _preset("desk-wide", 8, 8, 4, 4, num_samples=50_000, epochs=120, batch=100, lr_period=40),
        _preset("large", 16, 16, 8, 1),
        _preset("large-wide", 16, 16, 16, 4),
    )
}


def get_preset(name: str) -> TrainPreset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


SCENARIOS = {
    "default": ScenarioConfig(),
    "desk": ScenarioConfig(
        fixed_delays=(0.0, 4.6e-6, 6.3e-6, 15.4e-6), pdp_time_constant=20e-6, max_delay=20e-6
    ),
}
