"""Monte Carlo sweeps over pilot SNR: NMSE and detected path counts."""

from __future__ import annotations

import csv
import io
import logging
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .channel import (
    MAX_DENSE_MN,
    ScenarioConfig,
    assemble_channel_matrix,
    draw_channel,
    make_rng,
    psnr_to_sigma2,
    simulate_observation,
)
from .dl_pipic import dl_estimate
from .metrics import avg_paths, nmse, nmse_paths, to_db
from .otfs import OtfsConfig
from .pipic import EstimatorConfig, ExactColumns, estimate
from .svg import line_plot

logger = logging.getLogger(__name__)

METHODS = ("pipic", "dl-pipic")
WORKERS_ENV = "FRACDD_WORKERS"
SWEEP_COLUMNS = ("method", "psnr_db", "nmse_db", "avg_paths", "n_realizations", "n_failures")
LATENCY_COLUMNS = ("strategy", "l1", "l2", "mean_us", "p50_us", "p95_us", "n_calls")

# Stream tags for make_rng; the channel of realization r is shared by every
# PSNR point and method, noise is drawn per (r, PSNR).
_CHANNEL_STREAM = 0
_NOISE_STREAM = 1

__all__ = [
    "ExperimentConfig",
    "ExperimentResult",
    "SweepRow",
    "run_sweep",
    "load_config",
    "load_yaml",
    "write_sweep_csv",
    "write_latency_csv",
]


@dataclass
class ExperimentConfig:
    otfs: OtfsConfig = field(default_factory=OtfsConfig)
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    methods: tuple = ("pipic",)
    model_path: str | None = None
    psnr_grid_db: tuple = tuple(range(20, 37, 2))
    output_dir: str = "results"
    seed: int = 0
    workers: int | None = None

    def __post_init__(self):
        self.methods = tuple(self.methods)
        self.psnr_grid_db = tuple(float(p) for p in self.psnr_grid_db)
        unknown = set(self.methods) - set(METHODS)
        if unknown or not self.methods:
            raise ValueError(f"methods must be a non-empty subset of {METHODS}, got {self.methods}")
        if not self.psnr_grid_db:
            raise ValueError("psnr_grid_db must not be empty")
        if ("dl-pipic" in self.methods) != (self.model_path is not None):
            raise ValueError("model_path is required exactly when 'dl-pipic' is among the methods")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        if "otfs" in d:
            d["otfs"] = OtfsConfig.from_dict(d["otfs"])
        if "scenario" in d:
            d["scenario"] = ScenarioConfig.from_dict(d["scenario"])
        if "estimator" in d:
            d["estimator"] = EstimatorConfig.from_dict(d["estimator"])
        return cls(**d)

    def to_dict(self) -> dict:
        return {
            "otfs": self.otfs.to_dict(),
            "scenario": self.scenario.to_dict(),
            "estimator": self.estimator.to_dict(),
            "methods": list(self.methods),
            "model_path": self.model_path,
            "psnr_grid_db": list(self.psnr_grid_db),
            "output_dir": self.output_dir,
            "seed": self.seed,
            "workers": self.workers,
        }


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads ``1e-5`` and ``5.1e9`` as floats (YAML 1.2 style)."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(
        r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
        |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
        |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
        |[-+]?\.(?:inf|Inf|INF)
        |\.(?:nan|NaN|NAN))$""",
        re.X,
    ),
    list("-+0123456789."),
)


def load_yaml(stream) -> dict:
    return yaml.load(stream, Loader=_Loader) or {}


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return ExperimentConfig.from_dict(load_yaml(fh))


@dataclass
class SweepRow:
    method: str
    psnr_db: float
    nmse_db: float
    avg_paths: float
    n_realizations: int
    n_failures: int


@dataclass
class ExperimentResult:
    rows: list
    records: list = field(default_factory=list)

    def row(self, method: str, psnr_db: float) -> SweepRow:
        for r in self.rows:
            if r.method == method and r.psnr_db == float(psnr_db):
                return r
        raise KeyError((method, psnr_db))

    def curve(self, method: str, attr: str = "nmse_db"):
        rows = [r for r in self.rows if r.method == method]
        return [r.psnr_db for r in rows], [getattr(r, attr) for r in rows]


# Worker-process state: the predictor is loaded once per process.
_worker = {}


def _init_worker(exp: ExperimentConfig):
    _worker.clear()
    _worker["exp"] = exp
    _worker["exact"] = ExactColumns(exp.otfs)
    if "dl-pipic" in exp.methods:
        from .modelio import load_model

        _worker["pair"] = load_model(exp.model_path, expected_cfg=exp.otfs)


def _psnr_key(psnr_db: float) -> int:
    return int(round(psnr_db * 1000)) + 10**6


def _run_realization(r: int) -> list:
    exp = _worker["exp"]
    cfg = exp.otfs
    channel = draw_channel(exp.scenario, cfg, make_rng(exp.scenario.seed, _CHANNEL_STREAM, r))
    H_true = assemble_channel_matrix(cfg, channel) if cfg.MN <= MAX_DENSE_MN else None
    out = []
    for psnr in exp.psnr_grid_db:
        sigma2 = psnr_to_sigma2(cfg, psnr)
        obs = simulate_observation(cfg, channel, sigma2, make_rng(exp.seed, _NOISE_STREAM, r, _psnr_key(psnr)))
        for method in exp.methods:
            try:
                if method == "pipic":
                    state = estimate(obs.y, cfg, exp.estimator, _worker["exact"], sigma2)
                else:
                    state = dl_estimate(obs.y, cfg, exp.estimator, _worker["pair"], sigma2)
                if H_true is not None:
                    err = nmse(H_true, state.channel_matrix(cfg))
                else:
                    err = nmse_paths(cfg, channel, state.paths)
            except Exception:
                logger.exception("realization %d, psnr %g, method %s failed", r, psnr, method)
                out.append((method, psnr, r, None, None, None))
                continue
            out.append((method, psnr, r, err, state.n_paths, state.n_exact_columns))
    return out


def _resolve_workers(exp: ExperimentConfig) -> int:
    if exp.workers is not None:
        return max(1, int(exp.workers))
    return max(1, int(os.environ.get(WORKERS_ENV, "1")))


def _aggregate(exp: ExperimentConfig, records: list) -> list:
    rows = []
    for method in exp.methods:
        for psnr in exp.psnr_grid_db:
            mine = [rec for rec in records if rec[0] == method and rec[1] == psnr]
            ok = sorted((rec for rec in mine if rec[3] is not None), key=lambda rec: rec[2])
            failures = len(mine) - len(ok)
            if ok:
                nmse_db = to_db(float(np.mean([rec[3] for rec in ok])))
                paths = avg_paths(rec[4] for rec in ok)
            else:
                nmse_db, paths = float("nan"), float("nan")
            rows.append(SweepRow(method, psnr, nmse_db, paths, len(ok), failures))
    return rows


def run_sweep(exp: ExperimentConfig, write: bool = True) -> ExperimentResult:
    """Run every method on every (realization, PSNR) and aggregate.

    With ``write=True`` the resolved config, ``sweep.csv`` and two SVG plots
    are written to ``exp.output_dir``.
    """
    n = exp.scenario.num_realizations
    workers = _resolve_workers(exp)
    if workers == 1:
        _init_worker(exp)
        chunks = [_run_realization(r) for r in range(n)]
    else:
        with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(exp,)) as pool:
            chunks = list(pool.map(_run_realization, range(n)))
    records = [rec for chunk in chunks for rec in chunk]
    failures = sum(rec[3] is None for rec in records)
    if failures:
        logger.warning("%d estimator runs failed and were excluded", failures)
    result = ExperimentResult(_aggregate(exp, records), records)
    if write:
        write_outputs(exp, result)
    return result


def sweep_csv_text(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in rows:
        w.writerow([r.method, f"{r.psnr_db:g}", f"{r.nmse_db:.6f}", f"{r.avg_paths:.6f}", r.n_realizations, r.n_failures])
    return buf.getvalue()


def write_sweep_csv(rows, path) -> None:
    Path(path).write_text(sweep_csv_text(rows))


def write_latency_csv(report, path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LATENCY_COLUMNS)
    for r in report.records:
        w.writerow(
            [r.strategy, "" if r.l1 is None else r.l1, "" if r.l2 is None else r.l2,
             f"{r.mean_us:.3f}", f"{r.p50_us:.3f}", f"{r.p95_us:.3f}", r.n_calls]
        )
    Path(path).write_text(buf.getvalue())


def write_outputs(exp: ExperimentConfig, result: ExperimentResult) -> None:
    out = Path(exp.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config_resolved.yaml").write_text(yaml.safe_dump(exp.to_dict(), sort_keys=False))
    write_sweep_csv(result.rows, out / "sweep.csv")
    labels = {"pipic": "P-IPIC", "dl-pipic": "DL-based P-IPIC"}
    for attr, name, ylabel in (
        ("nmse_db", "nmse_vs_psnr.svg", "NMSE [dB]"),
        ("avg_paths", "avg_paths_vs_psnr.svg", "average detected paths"),
    ):
        series = {labels[m]: result.curve(m, attr) for m in exp.methods}
        (out / name).write_text(line_plot(series, f"{ylabel} vs pilot SNR", "PSNR [dB]", ylabel))
