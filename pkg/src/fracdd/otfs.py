"""OTFS frame geometry, delay-Doppler kernel and CDDPM columns.

Conventions used throughout the package:

* A delay-Doppler (DD) grid is an ``(M, N)`` complex array, rows indexed by
  delay bin ``m`` and columns by Doppler bin ``n``.
* ``vec`` stacks columns: ``vec(X)[n * M + m] == X[m, n]``.
* Rows and columns of the ``MN x MN`` kernel are indexed ``k * M + l`` with
  ``k`` the Doppler index and ``l`` the delay index, matching ``vec``.
* ``sinc`` is the normalized sinc, ``sin(pi x) / (pi x)``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

__all__ = [
    "OtfsConfig",
    "vec",
    "unvec",
    "build_pilot_frame",
    "upsilon_entry",
    "upsilon_matrix",
    "cddpm_column_exact",
    "cddpm_columns",
    "isfft",
    "sfft",
]


@dataclass(frozen=True)
class OtfsConfig:
    """Frame geometry and pilot placement.

    Defaults describe a 16x16 frame with 25 kHz subcarrier spacing at a
    5.1 GHz carrier and a unit-energy pilot in cell (0, 0).
    """

    M: int = 16
    N: int = 16
    delta_f: float = 25e3
    T: float = 1.0 / 25e3
    f_c: float = 5.1e9
    m_p: int = 0
    n_p: int = 0
    E_p: float = 1.0

    def __post_init__(self):
        for name in ("M", "N", "m_p", "n_p"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise TypeError(f"{name} must be an integer, got {value!r}")
        if self.M < 2 or self.N < 2:
            raise ValueError(f"M and N must be >= 2, got M={self.M}, N={self.N}")
        if not (self.delta_f > 0 and self.T > 0):
            raise ValueError("delta_f and T must be positive")
        if abs(self.T * self.delta_f - 1.0) > 1e-12:
            raise ValueError(
                f"rectangular-pulse OTFS needs T * delta_f == 1, got {self.T * self.delta_f!r}"
            )
        if not (0 <= self.m_p < self.M and 0 <= self.n_p < self.N):
            raise ValueError(f"pilot cell ({self.m_p}, {self.n_p}) outside {self.M}x{self.N} grid")
        if not self.E_p > 0:
            raise ValueError(f"E_p must be positive, got {self.E_p}")

    @classmethod
    def from_dict(cls, d: dict) -> "OtfsConfig":
        d = dict(d)
        if "delta_f" in d and "T" not in d:
            d["T"] = 1.0 / float(d["delta_f"])
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def MN(self) -> int:
        return self.M * self.N

    @property
    def delay_res(self) -> float:
        """Delay resolution ``1 / (M delta_f)`` in seconds."""
        return 1.0 / (self.M * self.delta_f)

    @property
    def doppler_res(self) -> float:
        """Doppler resolution ``1 / (N T)`` in Hz."""
        return 1.0 / (self.N * self.T)

    @property
    def pilot_index(self) -> int:
        return self.n_p * self.M + self.m_p


def vec(X: np.ndarray) -> np.ndarray:
    """Column-stack the trailing ``(M, N)`` axes of `X` into length ``MN``."""
    X = np.asarray(X)
    M, N = X.shape[-2:]
    return np.swapaxes(X, -1, -2).reshape(X.shape[:-2] + (M * N,))


def unvec(x: np.ndarray, M: int, N: int) -> np.ndarray:
    """Inverse of :func:`vec`."""
    x = np.asarray(x)
    if x.shape[-1] != M * N:
        raise ValueError(f"expected trailing length {M * N}, got {x.shape[-1]}")
    return np.swapaxes(x.reshape(x.shape[:-1] + (N, M)), -1, -2)


def build_pilot_frame(cfg: OtfsConfig) -> np.ndarray:
    """Single-pilot DD frame: ``sqrt(E_p)`` at ``(m_p, n_p)``, zeros elsewhere."""
    X = np.zeros((cfg.M, cfg.N), dtype=complex)
    X[cfg.m_p, cfg.n_p] = math.sqrt(cfg.E_p)
    return X


def _check_index(name, value, bound):
    if not (0 <= value < bound):
        raise IndexError(f"{name}={value} out of range [0, {bound})")


def upsilon_entry(cfg: OtfsConfig, tau, nu, k1, l1, k2, l2) -> complex:
    """Evaluate one entry ``Upsilon[k1*M + l1, k2*M + l2]`` of the DD kernel.

    Direct evaluation of the double sum over time slots and subcarriers with
    the inner ICI sum over ``s`` in ``[-m, M-1-m]``. Costs ``O(N M^2)``.
    """
    M, N = cfg.M, cfg.N
    _check_index("l'", l1, M)
    _check_index("l''", l2, M)
    _check_index("k'", k1, N)
    _check_index("k''", k2, N)
    if tau < 0:
        raise ValueError(f"tau must be non-negative, got {tau}")
    b = tau / cfg.T
    a = nu / cfg.delta_f

    m = np.arange(M)
    s = np.arange(-(M - 1), M)
    inside = (s[None, :] >= -m[:, None]) & (s[None, :] <= M - 1 - m[:, None])
    term1 = (1 - b) * np.exp(1j * np.pi * (1 + b) * (a - s)) * np.sinc((1 - b) * (a - s))
    term2 = (
        b
        * np.exp(-2j * np.pi * k2 / N)
        * np.exp(1j * np.pi * b * (a - s))
        * np.sinc(tau * (nu - s * cfg.delta_f))
    )
    summand = np.exp(2j * np.pi * s * l1 / M) * (term1 + term2)
    f = np.where(inside, summand[None, :], 0).sum(axis=1)

    n = np.arange(N)
    phase_m = np.exp(2j * np.pi * (m / M) * (l1 - l2 - M * b))
    phase_n = np.exp(-2j * np.pi * (n / N) * (k1 - k2 - N * a))
    total = np.sum(phase_n[:, None] * (f * phase_m)[None, :])
    return complex(np.exp(-2j * np.pi * tau * nu) / (M * N) * total)


def _ici_weights(cfg: OtfsConfig, tau, nu, k2):
    """Per-``s`` bracket of the ICI sum, shape ``(K, 2M-1)``.

    ``k2`` is the column Doppler index (scalar or ``(K, 1)``-broadcastable).
    """
    M = cfg.M
    tau = np.asarray(tau, dtype=float)[..., None]
    nu = np.asarray(nu, dtype=float)[..., None]
    s = np.arange(-(M - 1), M)
    b = tau / cfg.T
    a = nu / cfg.delta_f
    term1 = (1 - b) * np.exp(1j * np.pi * (1 + b) * (a - s)) * np.sinc((1 - b) * (a - s))
    term2 = b * np.exp(1j * np.pi * b * (a - s)) * np.sinc(tau * (nu - s * cfg.delta_f))
    return term1, term2 * np.exp(-2j * np.pi * np.asarray(k2) / cfg.N)


def _window_operators(M: int):
    s = np.arange(-(M - 1), M)
    l = np.arange(M)
    m = np.arange(M)
    e_s = np.exp(2j * np.pi * np.outer(l, s) / M)  # (l', j)
    mask = ((s[None, :] >= -m[:, None]) & (s[None, :] <= M - 1 - m[:, None])).astype(float)  # (m, j)
    return e_s, mask


def _doppler_sum(cfg: OtfsConfig, nu, dk):
    """``sum_n exp(-j 2 pi n/N (dk - N nu / delta_f))`` for integer offsets ``dk``."""
    N = cfg.N
    n = np.arange(N)
    a = np.asarray(nu, dtype=float)[..., None, None] / cfg.delta_f
    return np.exp(-2j * np.pi * (n / N) * (np.asarray(dk)[..., None] - N * a)).sum(axis=-1)


def upsilon_matrix(cfg: OtfsConfig, tau: float, nu: float) -> np.ndarray:
    """Materialize the ``MN x MN`` kernel using its separable structure.

    The time-slot sum depends only on ``k' - k''`` and factors out of the
    subcarrier sum, so the kernel costs ``O(M^3 + (MN)^2)`` instead of the
    brute-force ``O(N^3 M^4)``.
    """
    if tau < 0:
        raise ValueError(f"tau must be non-negative, got {tau}")
    M, N = cfg.M, cfg.N
    b = tau / cfg.T
    term1, term2 = _ici_weights(cfg, tau, nu, 0)  # shapes (2M-1,)
    e_s, mask = _window_operators(M)
    F1 = (e_s * term1) @ mask.T  # (l', m)
    F2 = (e_s * term2) @ mask.T
    l = np.arange(M)
    m = np.arange(M)
    # phase[l', m, l''] = exp(j 2 pi m/M (l' - l'' - M b))
    phase = np.exp(2j * np.pi * (m[None, :, None] / M) * (l[:, None, None] - l[None, None, :] - M * b))
    G1 = np.einsum("am,amc->ac", F1, phase)
    G2 = np.einsum("am,amc->ac", F2, phase)
    k = np.arange(N)
    G = G1[None] + np.exp(-2j * np.pi * k / N)[:, None, None] * G2[None]  # (k'', l', l'')
    D = _doppler_sum(cfg, nu, k[:, None] - k[None, :])  # (k', k'')
    ups = D[:, None, :, None] * np.transpose(G, (1, 0, 2))[None, :, :, :]
    scale = np.exp(-2j * np.pi * tau * nu) / (M * N)
    return scale * ups.reshape(M * N, M * N)


def cddpm_columns(cfg: OtfsConfig, taus, nus) -> np.ndarray:
    """Pilot-sparse CDDPM columns for a batch of DD pairs.

    Returns an array of shape ``(K, MN)`` where row ``k`` is
    ``Upsilon(taus[k], nus[k]) @ vec(X)``. Only the kernel column of the
    pilot cell is formed.
    """
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    nus = np.atleast_1d(np.asarray(nus, dtype=float))
    taus, nus = np.broadcast_arrays(taus, nus)
    if np.any(taus < 0):
        raise ValueError("delays must be non-negative")
    M, N = cfg.M, cfg.N
    term1, term2 = _ici_weights(cfg, taus, nus, cfg.n_p)
    c = term1 + term2  # (K, 2M-1)
    e_s, mask = _window_operators(M)
    F = np.einsum("lj,kj,mj->klm", e_s, c, mask, optimize=True)
    m = np.arange(M)
    l = np.arange(M)
    b = taus / cfg.T
    phase = np.exp(
        2j * np.pi * (m[None, None, :] / M) * (l[None, :, None] - cfg.m_p - M * b[:, None, None])
    )
    G = np.einsum("klm,klm->kl", F, phase)
    D = _doppler_sum(cfg, nus, np.arange(N) - cfg.n_p)  # (K, N)
    scale = math.sqrt(cfg.E_p) * np.exp(-2j * np.pi * taus * nus) / (M * N)
    cols = D[:, :, None] * G[:, None, :]
    return scale[:, None] * cols.reshape(len(taus), M * N)


def cddpm_column_exact(cfg: OtfsConfig, tau: float, nu: float, strategy: str = "pilot-sparse") -> np.ndarray:
    """CDDPM column ``r(tau, nu) = Upsilon(tau, nu) vec(X)``.

    Parameters
    ----------
    strategy : {"pilot-sparse", "full"}
        ``"pilot-sparse"`` uses that ``vec(X)`` is a scaled impulse and forms a
        single kernel column. ``"full"`` materializes the whole kernel by
        brute force, ``O(N^3 M^4)``, then multiplies by ``vec(X)``; it is the
        latency baseline and cross-check.
    """
    if strategy == "pilot-sparse":
        return cddpm_columns(cfg, tau, nu)[0]
    if strategy == "full":
        from ._bruteforce import upsilon_bruteforce

        return upsilon_bruteforce(cfg, tau, nu) @ vec(build_pilot_frame(cfg))
    raise ValueError(f"unknown strategy {strategy!r}; expected 'pilot-sparse' or 'full'")


def isfft(grid: np.ndarray) -> np.ndarray:
    """DD -> TF: ``F_M X F_N^H`` with unitary DFT matrices, on the last two axes."""
    return np.fft.ifft(np.fft.fft(grid, axis=-2, norm="ortho"), axis=-1, norm="ortho")


def sfft(grid: np.ndarray) -> np.ndarray:
    """TF -> DD: ``F_M^H X F_N``, the exact inverse of :func:`isfft`."""
    return np.fft.fft(np.fft.ifft(grid, axis=-2, norm="ortho"), axis=-1, norm="ortho")
