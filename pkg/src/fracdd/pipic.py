"""Progressive interpath interference cancellation (P-IPIC).

The estimator runs in two phases. The search phase detects paths one at a
time by maximizing the residue cost over an integer DD grid followed by a
sequence of shrinking fractional grids, re-fitting all gains by regularized
least squares after each detection. The refinement phase revisits every
detected path, re-estimating it against the observation cost with all other
paths held fixed, and drops trailing paths once the refined subset already
explains the observation.

Cost evaluations go through a *column source*, any object with

* ``columns(taus, nus) -> (K, MN) complex array`` and
* ``coarse_columns() -> (M*N_grid, MN) complex array`` for the integer grid,

so the exact and the neural variants share one code path. Columns of
detected paths are always computed exactly.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import asdict, dataclass, field, replace
from functools import cached_property

import numpy as np
import scipy.linalg

from .channel import PathSet
from .otfs import OtfsConfig, cddpm_columns, upsilon_matrix

logger = logging.getLogger(__name__)

__all__ = [
    "EstimatorConfig",
    "EstimateState",
    "ExactColumns",
    "residue_cost",
    "observation_cost",
    "rls_gains",
    "coarse_grid",
    "coarse_search",
    "fine_search",
    "search_phase",
    "refinement_phase",
    "estimate",
]

REFINE_MODES = ("neighborhood", "full")


@dataclass(frozen=True)
class EstimatorConfig:
    """P-IPIC parameters.

    ``eps_stop`` overrides the noise-derived stopping threshold
    ``3 sqrt(MN sigma2)`` when set. ``refine_coarse`` selects the coarse
    stage of the refinement phase: ``"neighborhood"`` (+-1 bin around the
    current estimate) or ``"full"`` (the whole integer grid).
    """

    P_max: int = 15
    s_max: int = 10
    eps_tau: float = 1e-10
    eps_nu: float = 1e-2
    m_tau: int = 10
    n_nu: int = 10
    lam: float = 1e-5
    eps_stop: float | None = None
    refine_coarse: str = "neighborhood"

    def __post_init__(self):
        if self.P_max < 1 or self.s_max < 1:
            raise ValueError("P_max and s_max must be >= 1")
        if self.m_tau < 2 or self.n_nu < 2:
            raise ValueError("m_tau and n_nu must be >= 2")
        if self.lam < 0:
            raise ValueError("lam must be non-negative")
        if self.eps_tau <= 0 or self.eps_nu <= 0:
            raise ValueError("eps_tau and eps_nu must be positive")
        if self.eps_stop is not None and self.eps_stop < 0:
            raise ValueError("eps_stop must be non-negative")
        if self.refine_coarse not in REFINE_MODES:
            raise ValueError(f"refine_coarse must be one of {REFINE_MODES}")

    @classmethod
    def from_dict(cls, d: dict) -> "EstimatorConfig":
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)

    def stop_threshold(self, cfg: OtfsConfig, sigma2: float) -> float:
        if self.eps_stop is not None:
            return float(self.eps_stop)
        return 3.0 * math.sqrt(cfg.MN * sigma2)

    @property
    def fine_grid_size(self) -> int:
        return (2 * (self.m_tau // 2) + 1) * (2 * (self.n_nu // 2) + 1)


@dataclass
class EstimateState:
    """Detected paths, their CDDPM columns and the current residue.

    ``columns`` has shape ``(MN, P)``; ``residue == y - columns @ gains``.
    ``n_search`` is the path count at the end of the search phase and
    ``n_exact_columns`` counts exact column evaluations for detected paths.
    """

    taus: np.ndarray
    nus: np.ndarray
    gains: np.ndarray
    columns: np.ndarray
    residue: np.ndarray
    n_search: int = 0
    n_exact_columns: int = 0
    residue_history: list = field(default_factory=list)

    @property
    def residue_norm(self) -> float:
        return float(np.linalg.norm(self.residue))

    @property
    def n_paths(self) -> int:
        return len(self.taus)

    @property
    def paths(self) -> PathSet:
        return PathSet(self.taus.copy(), self.nus.copy(), self.gains.copy())

    def channel_matrix(self, cfg: OtfsConfig) -> np.ndarray:
        """Reconstructed ``H_dd = sum_i gain_i Upsilon(tau_i, nu_i)``."""
        H = np.zeros((cfg.MN, cfg.MN), dtype=complex)
        for tau, nu, g in zip(self.taus, self.nus, self.gains):
            H += g * upsilon_matrix(cfg, tau, nu)
        return H


def coarse_grid(cfg: OtfsConfig) -> tuple[np.ndarray, np.ndarray]:
    """Integer DD grid, flattened delay-major.

    Delays ``0 .. (M-1)`` bins; Dopplers ``-floor(N/2) .. ceil(N/2)-1`` bins.
    """
    d = np.arange(cfg.M) * cfg.delay_res
    v = np.arange(-(cfg.N // 2), cfg.N - cfg.N // 2) * cfg.doppler_res
    taus, nus = np.meshgrid(d, v, indexing="ij")
    return taus.ravel(), nus.ravel()


class ExactColumns:
    """Column source backed by the exact pilot-sparse kernel column."""

    def __init__(self, cfg: OtfsConfig):
        self.cfg = cfg

    def columns(self, taus, nus) -> np.ndarray:
        return cddpm_columns(self.cfg, taus, nus)

    @cached_property
    def _coarse(self) -> np.ndarray:
        cols = self.columns(*coarse_grid(self.cfg))
        cols.setflags(write=False)
        return cols

    def coarse_columns(self) -> np.ndarray:
        return self._coarse


def residue_cost(column: np.ndarray, residue: np.ndarray) -> float:
    """``|r^H e|^2 / ||r||^2``."""
    column = np.asarray(column)
    energy = np.vdot(column, column).real
    if energy <= 0:
        raise ValueError("zero-norm CDDPM column")
    return float(abs(np.vdot(column, residue)) ** 2 / energy)


def _residue_costs(C: np.ndarray, e: np.ndarray, floor: float) -> np.ndarray:
    # Columns with energy <= floor get cost 0 instead of a huge ratio.
    energy = np.einsum("kj,kj->k", C.real, C.real) + np.einsum("kj,kj->k", C.imag, C.imag)
    corr = np.abs(C.conj() @ e) ** 2
    out = np.zeros(len(C))
    ok = energy > floor
    out[ok] = corr[ok] / energy[ok]
    return out


def _solve_gram(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
            return scipy.linalg.solve(A, b, assume_a="pos", check_finite=False)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, scipy.linalg.LinAlgWarning) as exc:
        warnings.warn(
            f"ill-conditioned Gram matrix ({exc}); falling back to least squares",
            RuntimeWarning,
            stacklevel=3,
        )
        return np.linalg.lstsq(A, b, rcond=None)[0]


def _as_matrix(R) -> np.ndarray:
    R = np.asarray(R)
    if R.ndim == 1:
        R = R[:, None]
    if R.shape[1] == 0:
        raise ValueError("CDDPM matrix has no columns")
    return R


def rls_gains(R, y, lam: float) -> np.ndarray:
    """Regularized least squares ``(R^H R + lam I)^{-1} R^H y``."""
    R = _as_matrix(R)
    A = R.conj().T @ R + lam * np.eye(R.shape[1])
    return _solve_gram(A, R.conj().T @ y)


def observation_cost(R, y, lam: float) -> float:
    """``y^H R (R^H R + lam I)^{-1} R^H y`` (real, non-negative)."""
    R = _as_matrix(R)
    b = R.conj().T @ y
    A = R.conj().T @ R + lam * np.eye(R.shape[1])
    return float(np.vdot(b, _solve_gram(A, b)).real)


def _observation_costs(others: np.ndarray, C: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    """Observation cost of ``[others, c]`` for every candidate row ``c`` of `C`."""
    K = len(C)
    p = others.shape[1]
    Oh = others.conj().T
    gram = np.empty((K, p + 1, p + 1), dtype=complex)
    gram[:, :p, :p] = Oh @ others
    cross = (Oh @ C.T).T  # (K, p)
    gram[:, :p, p] = cross
    gram[:, p, :p] = cross.conj()
    gram[:, p, p] = np.einsum("kj,kj->k", C.conj(), C).real
    idx = np.arange(p + 1)
    gram[:, idx, idx] += lam
    rhs = np.empty((K, p + 1), dtype=complex)
    rhs[:, :p] = Oh @ y
    rhs[:, p] = C.conj() @ y
    try:
        sol = np.linalg.solve(gram, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError:
        sol = np.stack([np.linalg.lstsq(g, r, rcond=None)[0] for g, r in zip(gram, rhs)])
    return np.einsum("kp,kp->k", rhs.conj(), sol).real


def _argmax(costs: np.ndarray) -> int:
    # np.argmax returns the first maximum: lowest delay, then lowest Doppler.
    return int(np.argmax(costs))


def coarse_search(residue, cfg: OtfsConfig, est_cfg: EstimatorConfig, column_source) -> tuple[float, float]:
    """Integer-grid argmax of the residue cost."""
    taus, nus = coarse_grid(cfg)
    costs = _residue_costs(column_source.coarse_columns(), residue, _energy_floor(cfg))
    k = _argmax(costs)
    return float(taus[k]), float(nus[k])


def _energy_floor(cfg: OtfsConfig) -> float:
    return (1e-6 * math.sqrt(cfg.E_p)) ** 2


def fine_grid(center, s: int, cfg: OtfsConfig, est_cfg: EstimatorConfig):
    """Fractional grid of iteration `s` around `center`, with its spacings.

    Delays below zero are clamped to zero.
    """
    w_tau = cfg.delay_res / est_cfg.m_tau ** (s - 1)
    w_nu = cfg.doppler_res / est_cfg.n_nu ** (s - 1)
    gam = np.arange(-(est_cfg.m_tau // 2), est_cfg.m_tau // 2 + 1)
    lam = np.arange(-(est_cfg.n_nu // 2), est_cfg.n_nu // 2 + 1)
    taus, nus = np.meshgrid(center[0] + gam * w_tau, center[1] + lam * w_nu, indexing="ij")
    return np.maximum(taus.ravel(), 0.0), nus.ravel(), w_tau, w_nu


def _refine(center, cost_fn, cfg, est_cfg, column_source, trace=None):
    tau, nu = center
    for s in range(1, est_cfg.s_max + 1):
        taus, nus, w_tau, w_nu = fine_grid((tau, nu), s, cfg, est_cfg)
        k = _argmax(cost_fn(column_source.columns(taus, nus)))
        tau, nu = float(taus[k]), float(nus[k])
        if trace is not None:
            trace.append((taus, nus, (tau, nu)))
        if w_tau < est_cfg.eps_tau and w_nu < est_cfg.eps_nu:
            break
    return tau, nu


def fine_search(coarse, residue, cfg: OtfsConfig, est_cfg: EstimatorConfig, column_source, trace=None):
    """Iterative fractional refinement of `coarse` against the residue cost.

    If `trace` is a list, one ``(taus, nus, argmax)`` tuple is appended per
    iteration.
    """
    floor = _energy_floor(cfg)
    return _refine(coarse, lambda C: _residue_costs(C, residue, floor), cfg, est_cfg, column_source, trace)


def _exact_column(cfg, tau, nu):
    return cddpm_columns(cfg, tau, nu)[0]


def search_phase(
    y, cfg: OtfsConfig, est_cfg: EstimatorConfig, column_source, eps_stop: float
) -> EstimateState:
    """Detect paths until the residue norm drops below `eps_stop` or ``P_max``."""
    y = np.asarray(y, dtype=complex)
    taus, nus, cols = [], [], []
    gains = np.zeros(0, dtype=complex)
    residue = y.copy()
    history = [float(np.linalg.norm(residue))]
    for _ in range(est_cfg.P_max):
        coarse = coarse_search(residue, cfg, est_cfg, column_source)
        tau, nu = fine_search(coarse, residue, cfg, est_cfg, column_source)
        taus.append(tau)
        nus.append(nu)
        cols.append(_exact_column(cfg, tau, nu))
        R = np.stack(cols, axis=1)
        gains = rls_gains(R, y, est_cfg.lam)
        residue = y - R @ gains
        history.append(float(np.linalg.norm(residue)))
        if history[-1] < eps_stop:
            break
    return EstimateState(
        taus=np.array(taus),
        nus=np.array(nus),
        gains=gains,
        columns=np.stack(cols, axis=1),
        residue=residue,
        n_search=len(taus),
        n_exact_columns=len(cols),
        residue_history=history,
    )


def _refine_start(current, others, y, cfg, est_cfg, column_source):
    if est_cfg.refine_coarse == "full":
        taus, nus = coarse_grid(cfg)
        C = column_source.coarse_columns()
    else:
        steps = np.array([-1, 0, 1])
        taus, nus = np.meshgrid(
            current[0] + steps * cfg.delay_res, current[1] + steps * cfg.doppler_res, indexing="ij"
        )
        taus, nus = np.maximum(taus.ravel(), 0.0), nus.ravel()
        C = column_source.columns(taus, nus)
    k = _argmax(_observation_costs(others, C, y, est_cfg.lam))
    return float(taus[k]), float(nus[k])


def refinement_phase(
    state: EstimateState, y, cfg: OtfsConfig, est_cfg: EstimatorConfig, column_source, eps_stop: float
) -> EstimateState:
    """Re-estimate each detected path against the observation cost.

    Path ``i`` is re-searched with every other column held fixed. After
    each path, gains and residue are recomputed from the paths refined so
    far; once that residue is below `eps_stop` the unrefined remainder is
    dropped as false alarms.
    """
    y = np.asarray(y, dtype=complex)
    taus = state.taus.copy()
    nus = state.nus.copy()
    cols = state.columns.copy()
    n_exact = state.n_exact_columns
    P = len(taus)
    keep = P
    gains, residue = state.gains, state.residue
    for i in range(P):
        others = np.delete(cols, i, axis=1)
        start = _refine_start((taus[i], nus[i]), others, y, cfg, est_cfg, column_source)
        tau, nu = _refine(
            start,
            lambda C: _observation_costs(others, C, y, est_cfg.lam),
            cfg,
            est_cfg,
            column_source,
        )
        taus[i], nus[i] = tau, nu
        cols[:, i] = _exact_column(cfg, tau, nu)
        n_exact += 1
        R = cols[:, : i + 1]
        gains = rls_gains(R, y, est_cfg.lam)
        residue = y - R @ gains
        if i < P - 1 and np.linalg.norm(residue) < eps_stop:
            keep = i + 1
            logger.debug("refinement met threshold after %d of %d paths", keep, P)
            break
    return replace(
        state,
        taus=taus[:keep],
        nus=nus[:keep],
        gains=gains,
        columns=cols[:, :keep],
        residue=residue,
        n_exact_columns=n_exact,
    )


def estimate(
    y, cfg: OtfsConfig, est_cfg: EstimatorConfig | None = None, column_source=None, sigma2: float = 0.0
) -> EstimateState:
    """Full P-IPIC: search phase followed by refinement phase.

    `column_source` defaults to exact columns (model-based P-IPIC).
    """
    est_cfg = est_cfg or EstimatorConfig()
    column_source = column_source if column_source is not None else ExactColumns(cfg)
    y = np.asarray(y, dtype=complex)
    if y.shape != (cfg.MN,):
        raise ValueError(f"observation must have shape ({cfg.MN},), got {y.shape}")
    eps = est_cfg.stop_threshold(cfg, sigma2)
    state = search_phase(y, cfg, est_cfg, column_source, eps)
    return refinement_phase(state, y, cfg, est_cfg, column_source, eps)
