"""Brute-force kernel materialization, the ``O(N^3 M^4)`` latency baseline.

Every entry is the full double sum over time slots and subcarriers with the
ICI sum re-evaluated inside, exactly as the defining expression reads. Only
the complex exponentials are tabulated.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _fill(M, N, c1, c2, e_s, e_m, e_n, e_k, out):
    for k1 in range(N):
        for l1 in range(M):
            row = k1 * M + l1
            for k2 in range(N):
                for l2 in range(M):
                    acc = 0j
                    for n in range(N):
                        pn = e_n[n, k1 - k2 + N - 1]
                        for m in range(M):
                            f = 0j
                            for s in range(-m, M - m):
                                j = s + M - 1
                                f += e_s[l1, j] * (c1[j] + e_k[k2] * c2[j])
                            acc += f * e_m[m, l1 - l2 + M - 1] * pn
                    out[row, k2 * M + l2] = acc


def upsilon_bruteforce(cfg, tau: float, nu: float) -> np.ndarray:
    M, N = cfg.M, cfg.N
    b = tau / cfg.T
    a = nu / cfg.delta_f
    s = np.arange(-(M - 1), M)
    c1 = (1 - b) * np.exp(1j * np.pi * (1 + b) * (a - s)) * np.sinc((1 - b) * (a - s))
    c2 = b * np.exp(1j * np.pi * b * (a - s)) * np.sinc(tau * (nu - s * cfg.delta_f))
    e_s = np.exp(2j * np.pi * np.outer(np.arange(M), s) / M)
    dl = np.arange(-(M - 1), M)
    e_m = np.exp(2j * np.pi * (np.arange(M)[:, None] / M) * (dl[None, :] - M * b))
    dk = np.arange(-(N - 1), N)
    e_n = np.exp(-2j * np.pi * (np.arange(N)[:, None] / N) * (dk[None, :] - N * a))
    e_k = np.exp(-2j * np.pi * np.arange(N) / N)
    out = np.empty((M * N, M * N), dtype=np.complex128)
    _fill(M, N, c1.astype(np.complex128), c2.astype(np.complex128), e_s, e_m, e_n, e_k, out)
    return out * (np.exp(-2j * math.pi * tau * nu) / (M * N))
