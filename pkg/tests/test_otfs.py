import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracdd.otfs import (
    OtfsConfig,
    build_pilot_frame,
    cddpm_column_exact,
    cddpm_columns,
    isfft,
    sfft,
    unvec,
    upsilon_entry,
    upsilon_matrix,
    vec,
)
from fracdd._bruteforce import upsilon_bruteforce

from oracles import dft_matrix, kernel_column, kernel_entry

# Entry (5, 5) of the M=N=4 kernel at tau=0.3 bins, nu=0.7 bins, from the
# loop oracle in oracles.py.
ENTRY_55_M4 = 0.1181419308237844 + 0.3124339807476494j


def _rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


class TestConfig:
    def test_defaults(self):
        cfg = OtfsConfig()
        assert (cfg.M, cfg.N, cfg.MN) == (16, 16, 256)
        assert cfg.delay_res == pytest.approx(2.5e-6)
        assert cfg.doppler_res == pytest.approx(1562.5)
        assert cfg.pilot_index == 0

    def test_pilot_index_is_doppler_major(self):
        cfg = OtfsConfig(M=4, N=3, m_p=2, n_p=1)
        assert cfg.pilot_index == 1 * 4 + 2

    @pytest.mark.parametrize(
        "kw",
        [
            {"M": 1},
            {"N": 0},
            {"M": 4.0},
            {"T": 1e-3},
            {"m_p": 16},
            {"n_p": -1},
            {"E_p": 0.0},
        ],
    )
    def test_invalid(self, kw):
        with pytest.raises((ValueError, TypeError)):
            OtfsConfig(**kw)

    def test_dict_round_trip_derives_T(self):
        cfg = OtfsConfig.from_dict({"M": 8, "N": 4, "delta_f": 15e3})
        assert cfg.T == pytest.approx(1 / 15e3)
        assert OtfsConfig.from_dict(cfg.to_dict()) == cfg


class TestVec:
    @given(st.integers(1, 7), st.integers(1, 7))
    def test_round_trip(self, M, N):
        X = np.arange(M * N).reshape(M, N) + 0j
        assert np.array_equal(unvec(vec(X), M, N), X)

    def test_column_stacking(self):
        X = np.array([[1, 2], [3, 4], [5, 6]])
        assert vec(X).tolist() == [1, 3, 5, 2, 4, 6]

    def test_wrong_length(self):
        with pytest.raises(ValueError):
            unvec(np.zeros(5), 2, 2)


class TestPilotFrame:
    def test_single_unit_entry(self):
        X = build_pilot_frame(OtfsConfig())
        assert X.shape == (16, 16)
        assert np.count_nonzero(X) == 1 and X[0, 0] == 1

    def test_energy(self):
        cfg = OtfsConfig(M=4, N=4, m_p=2, n_p=3, E_p=2.5)
        x = vec(build_pilot_frame(cfg))
        assert np.vdot(x, x).real == pytest.approx(2.5)
        assert x[cfg.pilot_index] == pytest.approx(math.sqrt(2.5))


class TestKernelEntry:
    def test_matches_loop_oracle(self):
        cfg = OtfsConfig(M=4, N=4)
        tau, nu = 0.3 * cfg.delay_res, 0.7 * cfg.doppler_res
        ours = upsilon_entry(cfg, tau, nu, 1, 1, 1, 1)
        assert ours == pytest.approx(ENTRY_55_M4, abs=1e-12)
        assert ours == pytest.approx(kernel_entry(4, 4, cfg.T, cfg.delta_f, tau, nu, 1, 1, 1, 1), abs=1e-12)

    @pytest.mark.parametrize("idx", [(0, 0, 0, 0), (2, 1, 2, 1), (3, 3, 3, 3)])
    def test_identity_diagonal(self, idx):
        assert upsilon_entry(OtfsConfig(M=4, N=4), 0.0, 0.0, *idx) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("idx", [(0, 0, 0, 1), (1, 2, 2, 1), (3, 0, 0, 3)])
    def test_identity_off_diagonal(self, idx):
        assert abs(upsilon_entry(OtfsConfig(M=4, N=4), 0.0, 0.0, *idx)) < 1e-12

    def test_range_checks(self):
        cfg = OtfsConfig(M=4, N=4)
        with pytest.raises(IndexError):
            upsilon_entry(cfg, 0.0, 0.0, 4, 0, 0, 0)
        with pytest.raises(IndexError):
            upsilon_entry(cfg, 0.0, 0.0, 0, 0, 0, -1)
        with pytest.raises(ValueError):
            upsilon_entry(cfg, -1e-9, 0.0, 0, 0, 0, 0)


class TestKernelMatrix:
    @pytest.mark.parametrize("M,N", [(4, 4), (8, 8), (4, 6)])
    def test_fast_form_matches_entries(self, M, N):
        cfg = OtfsConfig(M=M, N=N)
        rng = np.random.default_rng(M * 10 + N)
        tau, nu = rng.uniform(0, cfg.T), rng.uniform(-cfg.delta_f / 2, cfg.delta_f / 2)
        U = upsilon_matrix(cfg, tau, nu)
        for _ in range(20):
            k1, k2 = rng.integers(N, size=2)
            l1, l2 = rng.integers(M, size=2)
            assert U[k1 * M + l1, k2 * M + l2] == pytest.approx(
                upsilon_entry(cfg, tau, nu, k1, l1, k2, l2), abs=1e-12
            )

    def test_bruteforce_matches_oracle_column(self):
        cfg = OtfsConfig(M=4, N=3)
        tau, nu = 0.41 * cfg.T, -0.23 * cfg.delta_f
        U = upsilon_bruteforce(cfg, tau, nu)
        col = kernel_column(4, 3, cfg.T, cfg.delta_f, tau, nu, 2, 1)
        assert _rel(U[:, 2 * 4 + 1], col) < 1e-12

    def test_bruteforce_matches_fast(self):
        cfg = OtfsConfig(M=6, N=4)
        tau, nu = 0.77 * cfg.delay_res, 1.3 * cfg.doppler_res
        assert _rel(upsilon_bruteforce(cfg, tau, nu), upsilon_matrix(cfg, tau, nu)) < 1e-12

    def test_negative_delay_rejected(self):
        with pytest.raises(ValueError):
            upsilon_matrix(OtfsConfig(M=4, N=4), -1e-7, 0.0)


class TestColumns:
    @pytest.mark.parametrize("M,N,m_p,n_p,E_p", [(4, 4, 0, 0, 1.0), (4, 4, 1, 2, 2.0), (6, 4, 5, 3, 0.5)])
    def test_zero_shift_is_scaled_impulse(self, M, N, m_p, n_p, E_p):
        cfg = OtfsConfig(M=M, N=N, m_p=m_p, n_p=n_p, E_p=E_p)
        r = cddpm_column_exact(cfg, 0.0, 0.0)
        expected = np.zeros(cfg.MN, dtype=complex)
        expected[cfg.pilot_index] = math.sqrt(E_p)
        assert np.max(np.abs(r - expected)) < 1e-12

    def test_strategies_agree_with_offset_pilot(self):
        cfg = OtfsConfig(M=4, N=4, m_p=1, n_p=2, E_p=2.0)
        rng = np.random.default_rng(3)
        for _ in range(5):
            tau, nu = rng.uniform(0, cfg.T), rng.uniform(-cfg.delta_f / 2, cfg.delta_f / 2)
            full = cddpm_column_exact(cfg, tau, nu, "full")
            sparse = cddpm_column_exact(cfg, tau, nu, "pilot-sparse")
            assert _rel(sparse, full) < 1e-9

    def test_pilot_column_matches_loop_oracle(self):
        cfg = OtfsConfig(M=4, N=4, m_p=3, n_p=1)
        tau, nu = 0.6 * cfg.delay_res, -1.4 * cfg.doppler_res
        oracle = kernel_column(4, 4, cfg.T, cfg.delta_f, tau, nu, 1, 3)
        assert _rel(cddpm_column_exact(cfg, tau, nu), oracle) < 1e-12

    def test_batch_equals_single(self):
        cfg = OtfsConfig(M=8, N=8)
        rng = np.random.default_rng(4)
        taus = rng.uniform(0, cfg.T, 7)
        nus = rng.uniform(-cfg.delta_f / 2, cfg.delta_f / 2, 7)
        batch = cddpm_columns(cfg, taus, nus)
        for k in range(7):
            assert np.allclose(batch[k], cddpm_column_exact(cfg, taus[k], nus[k]), atol=1e-13)

    def test_unknown_strategy(self):
        with pytest.raises(ValueError):
            cddpm_column_exact(OtfsConfig(M=4, N=4), 0.0, 0.0, "dense")

    def test_energy_continuity(self):
        cfg = OtfsConfig(M=8, N=8)
        rng = np.random.default_rng(5)
        for _ in range(20):
            tau, nu = rng.uniform(0, cfg.T), rng.uniform(-cfg.delta_f / 2, cfg.delta_f / 2)
            e0 = np.sum(np.abs(cddpm_column_exact(cfg, tau, nu)) ** 2)
            e1 = np.sum(np.abs(cddpm_column_exact(cfg, tau + 1e-9 * cfg.delay_res, nu + 1e-9 * cfg.doppler_res)) ** 2)
            assert abs(e1 - e0) / e0 < 1e-6

    def test_integer_delay_preserves_energy(self):
        cfg = OtfsConfig()
        for d in (1, 2, 7):
            r = cddpm_column_exact(cfg, d * cfg.delay_res, 0.0)
            assert np.vdot(r, r).real == pytest.approx(cfg.E_p, rel=1e-12)

    @pytest.mark.xfail(
        strict=True,
        reason="integer-Doppler shifts leak energy through the truncated ICI window; "
        "measured ||r||^2 = 0.99797 at one delay bin and one Doppler bin",
    )
    def test_one_bin_shift_energy(self):
        cfg = OtfsConfig()
        r = cddpm_column_exact(cfg, 2.5e-6, 1562.5)
        assert np.vdot(r, r).real == pytest.approx(cfg.E_p, rel=1e-6)

    def test_one_bin_shift_energy_measured(self):
        # Brute force and pilot-sparse agree on the leaked energy.
        cfg = OtfsConfig()
        r = cddpm_column_exact(cfg, 2.5e-6, 1562.5)
        assert np.vdot(r, r).real == pytest.approx(0.99797, abs=5e-5)


class TestTransforms:
    def test_isfft_is_dft_sandwich(self):
        rng = np.random.default_rng(6)
        M, N = 5, 3
        X = rng.standard_normal((M, N)) + 1j * rng.standard_normal((M, N))
        ref = dft_matrix(M) @ X @ dft_matrix(N).conj().T
        assert np.allclose(isfft(X), ref, atol=1e-13)
        assert np.allclose(sfft(ref), X, atol=1e-13)

    def test_impulse_is_flat(self):
        X = np.array([[1, 0], [0, 0]], dtype=complex)
        assert np.allclose(isfft(X), np.full((2, 2), 0.5))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 2**31))
    def test_unitary_round_trip(self, M, N, seed):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((M, N)) + 1j * rng.standard_normal((M, N))
        Y = isfft(X)
        assert abs(np.linalg.norm(Y) - np.linalg.norm(X)) <= 1e-12 * max(1.0, np.linalg.norm(X))
        assert np.max(np.abs(sfft(Y) - X)) <= 1e-12 * max(1.0, np.linalg.norm(X))

    def test_batched(self):
        rng = np.random.default_rng(7)
        X = rng.standard_normal((3, 4, 5)) + 0j
        Y = isfft(X)
        for i in range(3):
            assert np.allclose(Y[i], isfft(X[i]))
