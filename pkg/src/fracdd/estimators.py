"""Estimator-style front ends for the channel estimators.

``fit`` validates the parameters and builds the column source (including
the cached integer-grid dictionary); ``predict`` runs the estimator on a
batch of observations.

>>> est = PIPIC(otfs=OtfsConfig(M=8, N=8)).fit()
>>> states = est.predict(Y, sigma2=1e-3)          # doctest: +SKIP
"""

from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .dl_pipic import NeuralColumns
from .neural import CddpmSurrogate, PredictorPair
from .otfs import OtfsConfig
from .pipic import EstimateState, EstimatorConfig, ExactColumns, estimate
from .validation import check_observations, check_sigma2

__all__ = ["PIPIC", "DLPIPIC"]


class PIPIC(BaseEstimator):
    """Model-based P-IPIC channel estimator.

    Parameters mirror :class:`~fracdd.pipic.EstimatorConfig`; ``otfs``
    defaults to :class:`~fracdd.otfs.OtfsConfig()`.
    """

    def __init__(
        self,
        otfs=None,
        P_max=15,
        s_max=10,
        eps_tau=1e-10,
        eps_nu=1e-2,
        m_tau=10,
        n_nu=10,
        lam=1e-5,
        eps_stop=None,
        refine_coarse="neighborhood",
    ):
        self.otfs = otfs
        self.P_max = P_max
        self.s_max = s_max
        self.eps_tau = eps_tau
        self.eps_nu = eps_nu
        self.m_tau = m_tau
        self.n_nu = n_nu
        self.lam = lam
        self.eps_stop = eps_stop
        self.refine_coarse = refine_coarse

    def _estimator_config(self) -> EstimatorConfig:
        return EstimatorConfig(
            P_max=self.P_max,
            s_max=self.s_max,
            eps_tau=self.eps_tau,
            eps_nu=self.eps_nu,
            m_tau=self.m_tau,
            n_nu=self.n_nu,
            lam=self.lam,
            eps_stop=self.eps_stop,
            refine_coarse=self.refine_coarse,
        )

    def _column_source(self, cfg):
        return ExactColumns(cfg)

    def fit(self, X=None, y=None):
        """Validate parameters and precompute the integer-grid columns.

        The model-based estimator has nothing to learn; `X` and `y` are
        accepted for API compatibility and ignored.
        """
        self.otfs_ = self.otfs if self.otfs is not None else OtfsConfig()
        self.config_ = self._estimator_config()
        self.source_ = self._column_source(self.otfs_)
        self.source_.coarse_columns()
        return self

    def estimate(self, y, sigma2: float = 0.0) -> EstimateState:
        check_is_fitted(self, "source_")
        y = check_observations(y, self.otfs_.MN)[0]
        return estimate(y, self.otfs_, self.config_, self.source_, float(sigma2))

    def predict(self, Y, sigma2=0.0) -> list:
        """Estimate every row of `Y`; `sigma2` is a scalar or one per row."""
        check_is_fitted(self, "source_")
        Y = check_observations(Y, self.otfs_.MN)
        s2 = check_sigma2(sigma2, len(Y))
        return [estimate(y, self.otfs_, self.config_, self.source_, float(s)) for y, s in zip(Y, s2)]


class DLPIPIC(PIPIC):
    """P-IPIC with surrogate-predicted columns during the argmax searches.

    ``surrogate`` is a fitted :class:`~fracdd.neural.CddpmSurrogate`, a
    :class:`~fracdd.neural.PredictorPair`, a model file path, or any object
    with a ``columns(taus, nus)`` method.
    """

    def __init__(
        self,
        surrogate=None,
        otfs=None,
        P_max=15,
        s_max=10,
        eps_tau=1e-10,
        eps_nu=1e-2,
        m_tau=10,
        n_nu=10,
        lam=1e-5,
        eps_stop=None,
        refine_coarse="neighborhood",
    ):
        super().__init__(
            otfs=otfs,
            P_max=P_max,
            s_max=s_max,
            eps_tau=eps_tau,
            eps_nu=eps_nu,
            m_tau=m_tau,
            n_nu=n_nu,
            lam=lam,
            eps_stop=eps_stop,
            refine_coarse=refine_coarse,
        )
        self.surrogate = surrogate

    def _predictor(self):
        sur = self.surrogate
        if sur is None:
            raise ValueError("DLPIPIC needs a surrogate")
        if isinstance(sur, CddpmSurrogate):
            check_is_fitted(sur, "pair_")
            return sur.pair_
        if isinstance(sur, (str, bytes)) or hasattr(sur, "__fspath__"):
            from .modelio import load_model

            return load_model(sur, expected_cfg=self.otfs)
        return sur

    def fit(self, X=None, y=None):
        predictor = self._predictor()
        if self.otfs is None and isinstance(predictor, PredictorPair):
            self.otfs_ = predictor.cfg
        else:
            self.otfs_ = self.otfs if self.otfs is not None else OtfsConfig()
        pcfg = getattr(predictor, "cfg", self.otfs_)
        if (pcfg.M, pcfg.N) != (self.otfs_.M, self.otfs_.N):
            raise ValueError(f"surrogate built for M={pcfg.M}, N={pcfg.N}; estimator uses M={self.otfs_.M}, N={self.otfs_.N}")
        self.config_ = self._estimator_config()
        self.source_ = NeuralColumns(predictor, self.otfs_)
        self.source_.coarse_columns()
        return self
