"""Per-call latency of the three column-evaluation strategies."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .otfs import OtfsConfig, cddpm_column_exact
from .neural import predict_cddpm_column

__all__ = ["LatencyRecord", "LatencyReport", "latency_bench", "random_dd_pairs"]


@dataclass
class LatencyRecord:
    strategy: str
    l1: int | None
    l2: int | None
    mean_us: float
    p50_us: float
    p95_us: float
    n_calls: int

    @classmethod
    def from_times(cls, strategy, times_ns, l1=None, l2=None):
        t = np.asarray(times_ns, dtype=float) / 1e3
        return cls(strategy, l1, l2, float(t.mean()), float(np.percentile(t, 50)), float(np.percentile(t, 95)), len(t))


@dataclass
class LatencyReport:
    records: list = field(default_factory=list)

    def get(self, strategy, l1=None, l2=None) -> LatencyRecord:
        for r in self.records:
            if r.strategy == strategy and r.l1 == l1 and r.l2 == l2:
                return r
        raise KeyError((strategy, l1, l2))

    def speedup(self, strategy, l1=None, l2=None, baseline="full") -> float:
        """Mean-time ratio ``baseline / strategy``."""
        return self.get(baseline).mean_us / self.get(strategy, l1, l2).mean_us


def random_dd_pairs(cfg: OtfsConfig, n: int, rng: np.random.Generator):
    """Fractional pairs uniform over ``[0, T) x [-delta_f/2, delta_f/2)``."""
    return rng.uniform(0.0, cfg.T, n), rng.uniform(-cfg.delta_f / 2, cfg.delta_f / 2, n)


def _time_calls(fn, taus, nus, warmup):
    for i in range(min(warmup, len(taus))):
        fn(taus[i], nus[i])
    out = np.empty(len(taus), dtype=np.int64)
    for i, (tau, nu) in enumerate(zip(taus, nus)):
        t0 = time.perf_counter_ns()
        fn(tau, nu)
        out[i] = time.perf_counter_ns() - t0
    return out


def latency_bench(cfg: OtfsConfig, pairs=(), n_pairs: int = 200, rng=None, warmup: int = 3) -> LatencyReport:
    """Time brute-force, pilot-sparse and surrogate column evaluation.

    Every strategy sees the same `n_pairs` random DD pairs, one call per
    pair; `warmup` untimed calls precede each strategy. `pairs` is an
    iterable of :class:`~fracdd.neural.PredictorPair` (weights need not be
    trained, timing does not depend on them).
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    taus, nus = random_dd_pairs(cfg, n_pairs, rng)
    report = LatencyReport()
    report.records.append(
        LatencyRecord.from_times(
            "full", _time_calls(lambda t, v: cddpm_column_exact(cfg, t, v, "full"), taus, nus, warmup)
        )
    )
    report.records.append(
        LatencyRecord.from_times(
            "pilot-sparse", _time_calls(lambda t, v: cddpm_column_exact(cfg, t, v), taus, nus, warmup)
        )
    )
    for pair in pairs:
        _, l1, l2, _ = pair.layer_dims
        times = _time_calls(lambda t, v, p=pair: predict_cddpm_column(p, t, v), taus, nus, warmup)
        report.records.append(LatencyRecord.from_times("fnn", times, l1, l2))
    return report
