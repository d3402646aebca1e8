import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from fracdd.channel import PathSet, make_rng, noiseless_observation
from fracdd.dl_pipic import ExactOraclePredictor
from fracdd.estimators import DLPIPIC, PIPIC
from fracdd.modelio import save_model
from fracdd.neural import CddpmSurrogate, NormalizationSpec, PredictorPair, init_model
from fracdd.otfs import OtfsConfig
from fracdd.pipic import EstimatorConfig, estimate

CFG = OtfsConfig(M=8, N=8)


def _y():
    ch = PathSet([2 * CFG.delay_res, 5.3 * CFG.delay_res], [CFG.doppler_res, -0.4 * CFG.doppler_res], [1.0, 0.5j])
    return noiseless_observation(CFG, ch) + 1e-3 * make_rng(0).standard_normal(CFG.MN)


def test_get_params_and_clone():
    est = PIPIC(otfs=CFG, P_max=4, refine_coarse="full")
    p = est.get_params()
    assert p["P_max"] == 4 and p["refine_coarse"] == "full" and p["otfs"] == CFG
    c = clone(est)
    assert c.get_params() == p
    est.set_params(P_max=7)
    assert est.P_max == 7


def test_matches_functional_api():
    y = _y()
    est = PIPIC(otfs=CFG, P_max=5).fit()
    a = est.estimate(y, 1e-6)
    b = estimate(y, CFG, EstimatorConfig(P_max=5), sigma2=1e-6)
    assert np.array_equal(a.taus, b.taus) and np.array_equal(a.gains, b.gains)


def test_predict_batch():
    y = _y()
    est = PIPIC(otfs=CFG, P_max=3).fit()
    out = est.predict(np.stack([y, 2 * y]), sigma2=[1e-6, 4e-6])
    assert len(out) == 2
    assert np.allclose(out[1].gains, 2 * out[0].gains, rtol=1e-6)


def test_validation():
    est = PIPIC(otfs=CFG).fit()
    with pytest.raises(ValueError):
        est.estimate(np.zeros(10))
    with pytest.raises(ValueError):
        est.predict(np.zeros((2, CFG.MN)), sigma2=[-1.0, 0.0])
    with pytest.raises(NotFittedError):
        PIPIC().estimate(np.zeros(256))
    with pytest.raises(ValueError):
        PIPIC(otfs=CFG, P_max=0).fit()


def test_dl_with_oracle_equals_model_based():
    y = _y()
    a = PIPIC(otfs=CFG, P_max=4).fit().estimate(y, 1e-6)
    b = DLPIPIC(ExactOraclePredictor(CFG), otfs=CFG, P_max=4).fit().estimate(y, 1e-6)
    assert np.array_equal(a.taus, b.taus) and np.array_equal(a.residue, b.residue)


def _pair(cfg):
    rng = np.random.default_rng(1)
    dims = [2, 16, 16, cfg.MN]
    return PredictorPair(init_model(dims, rng), init_model(dims, rng), cfg, NormalizationSpec.for_config(cfg))


def test_dl_accepts_model_file(tmp_path):
    path = tmp_path / "m.fnn"
    save_model(_pair(CFG), path)
    est = DLPIPIC(str(path), otfs=CFG, P_max=2).fit()
    assert est.otfs_ == CFG
    assert est.estimate(_y(), 1e-6).n_paths >= 1


def test_dl_takes_geometry_from_pair():
    est = DLPIPIC(_pair(CFG), P_max=2).fit()
    assert est.otfs_ == CFG


def test_dl_accepts_fitted_surrogate():
    cfg = OtfsConfig(M=4, N=4)
    rng = np.random.default_rng(2)
    X = np.column_stack([rng.uniform(0, cfg.T, 50), rng.uniform(-cfg.delta_f / 2, cfg.delta_f / 2, 50)])
    sur = CddpmSurrogate(otfs=cfg, hidden=(8, 8), epochs=1, batch_size=10).fit(X, np.ones((50, cfg.MN), complex))
    assert DLPIPIC(sur, otfs=cfg).fit().source_.predictor is sur.pair_
    with pytest.raises(NotFittedError):
        DLPIPIC(CddpmSurrogate(otfs=cfg), otfs=cfg).fit()


def test_dl_errors():
    with pytest.raises(ValueError):
        DLPIPIC().fit()
    with pytest.raises(ValueError, match="M=8"):
        DLPIPIC(_pair(CFG), otfs=OtfsConfig(M=4, N=4)).fit()
