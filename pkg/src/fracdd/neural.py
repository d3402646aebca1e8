"""Feedforward surrogate for time-frequency CDDPM columns.

Two ReLU networks with two hidden layers map a normalized DD pair to the
real and imaginary parts of ``vec(isfft(unvec(r(tau, nu))))``. Training is
mini-batch Adam on the per-sample L1 loss with a step learning-rate decay.
Everything is plain numpy; gradients are hand-derived.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .otfs import OtfsConfig, cddpm_columns, isfft, sfft, unvec, vec
from .validation import check_pairs

logger = logging.getLogger(__name__)

__all__ = [
    "FnnModel",
    "NormalizationSpec",
    "TrainConfig",
    "TrainingDivergedError",
    "PredictorPair",
    "CddpmSurrogate",
    "LatencySizing",
    "init_model",
    "forward",
    "loss_and_gradients",
    "learning_rate",
    "train",
    "train_pair",
    "generate_dataset",
    "predict_cddpm_column",
    "validate_latency_sizing",
]


class TrainingDivergedError(RuntimeError):
    pass


@dataclass
class FnnModel:
    """Two-hidden-layer MLP, ReLU hidden activations, linear output.

    ``weights[i]`` has shape ``(out, in)``; ``biases[i]`` shape ``(out,)``.
    """

    weights: list
    biases: list

    def __post_init__(self):
        if len(self.weights) != 3 or len(self.biases) != 3:
            raise ValueError("FnnModel needs exactly two hidden layers (three weight matrices)")
        dims = self.layer_dims
        if dims[0] != 2:
            raise ValueError(f"input dimension must be 2, got {dims[0]}")
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.shape != (dims[i + 1], dims[i]) or b.shape != (dims[i + 1],):
                raise ValueError(f"layer {i}: inconsistent shapes {W.shape}, {b.shape}")
            if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {i}: non-finite parameters")

    @property
    def layer_dims(self) -> list[int]:
        return [self.weights[0].shape[1]] + [W.shape[0] for W in self.weights]

    @property
    def dtype(self):
        return self.weights[0].dtype

    def astype(self, dtype) -> "FnnModel":
        return FnnModel([W.astype(dtype) for W in self.weights], [b.astype(dtype) for b in self.biases])

    def copy(self) -> "FnnModel":
        return self.astype(self.dtype)


def init_model(layer_dims, rng: np.random.Generator, dtype=np.float32) -> FnnModel:
    """Fan-in scaled symmetric uniform init.

    Hidden-layer weights (followed by a ReLU) use the He bound
    ``sqrt(6 / fan_in)``; output-layer weights and all biases use
    ``1 / sqrt(fan_in)``. Random (rather than zero) biases spread the
    first-layer ReLU kinks over the input box, which the oscillatory
    targets need.
    """
    layer_dims = [int(d) for d in layer_dims]
    if len(layer_dims) != 4:
        raise ValueError("layer_dims must be [2, L1, L2, out]")
    weights, biases = [], []
    n_layers = len(layer_dims) - 1
    for i, (fan_in, fan_out) in enumerate(zip(layer_dims[:-1], layer_dims[1:])):
        bound = 1.0 / math.sqrt(fan_in)
        w_bound = math.sqrt(6.0 / fan_in) if i < n_layers - 1 else bound
        weights.append(rng.uniform(-w_bound, w_bound, (fan_out, fan_in)).astype(dtype))
        biases.append(rng.uniform(-bound, bound, fan_out).astype(dtype))
    return FnnModel(weights, biases)


def forward(model: FnnModel, x: np.ndarray) -> np.ndarray:
    """Network output for one input of shape ``(2,)`` or a batch ``(B, 2)``."""
    x = np.asarray(x, dtype=model.dtype)
    W1, W2, W3 = model.weights
    b1, b2, b3 = model.biases
    h = np.maximum(x @ W1.T + b1, 0)
    h = np.maximum(h @ W2.T + b2, 0)
    return h @ W3.T + b3


def loss_and_gradients(model: FnnModel, x: np.ndarray, target: np.ndarray):
    """Batch-mean L1 loss ``mean_b sum_n |out - target|`` and its gradients.

    Returns ``(loss, grad_weights, grad_biases)``. The subgradient of
    ``|.|`` at zero is taken as zero.
    """
    x = np.asarray(x, dtype=model.dtype)
    W1, W2, W3 = model.weights
    b1, b2, b3 = model.biases
    B = x.shape[0]
    z1 = x @ W1.T + b1
    h1 = np.maximum(z1, 0)
    z2 = h1 @ W2.T + b2
    h2 = np.maximum(z2, 0)
    out = h2 @ W3.T + b3
    diff = out - target
    loss = float(np.abs(diff).sum(dtype=np.float64) / B)

    d3 = np.sign(diff) / B
    gW3 = d3.T @ h2
    gb3 = d3.sum(axis=0)
    d2 = (d3 @ W3) * (z2 > 0)
    gW2 = d2.T @ h1
    gb2 = d2.sum(axis=0)
    d1 = (d2 @ W2) * (z1 > 0)
    gW1 = d1.T @ x
    gb1 = d1.sum(axis=0)
    return loss, [gW1, gW2, gW3], [gb1, gb2, gb3]


@dataclass(frozen=True)
class TrainConfig:
    """Training recipe. Defaults are the full-scale hyperparameters."""

    num_samples: int = 200_000
    batch: int = 1000
    epochs: int = 100
    lr0: float = 1e-3
    lr_drop: float = 0.5
    lr_period: int = 10
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    holdout: float = 0.05
    seed: int = 0

    def __post_init__(self):
        for name in ("num_samples", "batch", "epochs", "lr_period"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not (self.lr0 > 0 and 0 < self.lr_drop <= 1):
            raise ValueError("lr0 must be positive and lr_drop in (0, 1]")
        if not (0 <= self.holdout < 1):
            raise ValueError("holdout must be in [0, 1)")

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


def learning_rate(tc: TrainConfig, epoch: int) -> float:
    """Step schedule ``lr0 * lr_drop ** (epoch // lr_period)``, epochs from 0."""
    return tc.lr0 * tc.lr_drop ** (epoch // tc.lr_period)


@dataclass
class TrainHistory:
    loss: list = field(default_factory=list)
    holdout_loss: list = field(default_factory=list)
    lr: list = field(default_factory=list)


class _Adam:
    def __init__(self, params, tc: TrainConfig):
        self.tc = tc
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads, lr):
        tc = self.tc
        self.t += 1
        c1 = 1 - tc.beta1**self.t
        c2 = 1 - tc.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= tc.beta1
            m += (1 - tc.beta1) * g
            v *= tc.beta2
            v += (1 - tc.beta2) * (g * g)
            p -= (lr / c1) * m / (np.sqrt(v / c2) + tc.eps)


def train(model: FnnModel, X: np.ndarray, Y: np.ndarray, tc: TrainConfig, rng=None, verbose=False):
    """Fit `model` in place on inputs `X` ``(S, 2)`` and real targets `Y` ``(S, out)``.

    A ``tc.holdout`` fraction is set aside and only monitored. Returns
    ``(model, history)``; ``history.loss[e]`` is the mean mini-batch loss of
    epoch ``e``.
    """
    X = np.asarray(X, dtype=model.dtype)
    Y = np.asarray(Y, dtype=model.dtype)
    if len(X) == 0 or len(X) != len(Y):
        raise ValueError("training set must be non-empty with matching X and Y")
    if Y.shape[1] != model.layer_dims[-1]:
        raise ValueError(f"targets have {Y.shape[1]} outputs, model has {model.layer_dims[-1]}")
    rng = rng if rng is not None else np.random.default_rng(tc.seed)
    order = rng.permutation(len(X))
    n_hold = int(round(tc.holdout * len(X))) if len(X) > 1 else 0
    hold, fit_idx = order[:n_hold], order[n_hold:]
    Xh, Yh = X[hold], Y[hold]
    Xf, Yf = X[fit_idx], Y[fit_idx]

    params = model.weights + model.biases
    opt = _Adam(params, tc)
    history = TrainHistory()
    for epoch in range(tc.epochs):
        lr = learning_rate(tc, epoch)
        perm = rng.permutation(len(Xf))
        total, batches = 0.0, 0
        for start in range(0, len(Xf), tc.batch):
            idx = perm[start : start + tc.batch]
            loss, gW, gb = loss_and_gradients(model, Xf[idx], Yf[idx])
            if not math.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, batch {batches} (lr={lr:g}); "
                    "check target scaling and learning rate"
                )
            opt.step(params, gW + gb, lr)
            total += loss
            batches += 1
        history.loss.append(total / batches)
        history.lr.append(lr)
        if n_hold:
            history.holdout_loss.append(float(np.abs(forward(model, Xh) - Yh).sum(axis=1).mean()))
        if verbose:
            logger.info("epoch %d lr %.2e loss %.5f", epoch, lr, history.loss[-1])
    return model, history


@dataclass(frozen=True)
class NormalizationSpec:
    """Input scaling: ``tau / tau_scale`` and ``nu / nu_scale``."""

    tau_scale: float
    nu_scale: float

    def __post_init__(self):
        if not (self.tau_scale > 0 and self.nu_scale > 0):
            raise ValueError("normalization scales must be positive")

    @classmethod
    def for_config(cls, cfg: OtfsConfig) -> "NormalizationSpec":
        """Delay over one symbol ``T``, Doppler over half a subcarrier spacing."""
        return cls(tau_scale=cfg.T, nu_scale=cfg.delta_f / 2)

    def normalize(self, taus, nus) -> np.ndarray:
        return np.stack([np.asarray(taus, float) / self.tau_scale, np.asarray(nus, float) / self.nu_scale], axis=-1)


def tf_targets(cfg: OtfsConfig, taus, nus) -> np.ndarray:
    """Complex TF image ``vec(isfft(unvec(r)))`` for each pair, ``(K, MN)``."""
    cols = cddpm_columns(cfg, taus, nus)
    return vec(isfft(unvec(cols, cfg.M, cfg.N)))


def generate_dataset(cfg: OtfsConfig, norm: NormalizationSpec, n_samples: int, rng: np.random.Generator):
    """Uniform DD pairs over ``[0, tau_scale] x [-nu_scale, nu_scale]``.

    Returns ``(X, Y)`` with ``X`` the normalized inputs ``(S, 2)`` and ``Y``
    the complex TF targets ``(S, MN)``.
    """
    taus = rng.uniform(0.0, norm.tau_scale, n_samples)
    nus = rng.uniform(-norm.nu_scale, norm.nu_scale, n_samples)
    Y = np.empty((n_samples, cfg.MN), dtype=complex)
    for start in range(0, n_samples, 4096):
        sl = slice(start, start + 4096)
        Y[sl] = tf_targets(cfg, taus[sl], nus[sl])
    return norm.normalize(taus, nus), Y


@dataclass
class PredictorPair:
    """Real- and imaginary-part networks plus the geometry they were trained for."""

    fnn_real: FnnModel
    fnn_imag: FnnModel
    cfg: OtfsConfig
    norm: NormalizationSpec

    def __post_init__(self):
        if self.fnn_real.layer_dims != self.fnn_imag.layer_dims:
            raise ValueError("real and imaginary networks must share layer_dims")
        if self.fnn_real.layer_dims[-1] != self.cfg.MN:
            raise ValueError(f"network output {self.fnn_real.layer_dims[-1]} != MN={self.cfg.MN}")

    @property
    def layer_dims(self):
        return self.fnn_real.layer_dims

    def predict_tf(self, taus, nus) -> np.ndarray:
        x = self.norm.normalize(np.atleast_1d(taus), np.atleast_1d(nus))
        if np.any((x[:, 0] < 0) | (x[:, 0] > 1) | (np.abs(x[:, 1]) > 1)):
            logger.debug("surrogate queried outside its normalized training box")
        re = forward(self.fnn_real, x).astype(np.float64)
        im = forward(self.fnn_imag, x).astype(np.float64)
        return re + 1j * im

    def columns(self, taus, nus) -> np.ndarray:
        """Predicted DD columns ``vec(sfft(unvec(tf)))``, shape ``(K, MN)``."""
        M, N = self.cfg.M, self.cfg.N
        return vec(sfft(unvec(self.predict_tf(taus, nus), M, N)))


def predict_cddpm_column(pair: PredictorPair, tau: float, nu: float) -> np.ndarray:
    return pair.columns(tau, nu)[0]


def train_pair(cfg: OtfsConfig, hidden, X, Y, tc: TrainConfig, rng, dtype=np.float32, verbose=False):
    """Train the real- and imaginary-part networks on normalized pairs `X`.

    `Y` holds complex TF targets ``(S, MN)``. Both networks draw their init
    and shuffling from `rng`, real part first. Returns
    ``(PredictorPair, {"real": history, "imag": history})``.
    """
    dims = [2, *hidden, cfg.MN]
    models, histories = [], {}
    for part, target in (("real", Y.real), ("imag", Y.imag)):
        logger.info("training %s network %s on %d samples", part, dims, len(X))
        model, hist = train(init_model(dims, rng, dtype=dtype), X, target, tc, rng, verbose=verbose)
        models.append(model)
        histories[part] = hist
    return PredictorPair(models[0], models[1], cfg, NormalizationSpec.for_config(cfg)), histories


class CddpmSurrogate(RegressorMixin, BaseEstimator):
    """Estimator wrapper that trains a :class:`PredictorPair`.

    ``fit(X, Y)`` takes physical DD pairs ``X`` of shape ``(S, 2)`` (seconds,
    Hz) and complex TF targets ``Y`` of shape ``(S, MN)``; ``predict``
    returns complex TF columns.

    Parameters
    ----------
    otfs : OtfsConfig
        Frame geometry the targets were generated for.
    hidden : tuple of int
        ``(L1, L2)``.
    epochs, batch_size, lr, lr_drop, lr_period :
        Training schedule, see :class:`TrainConfig`.
    holdout : float
        Fraction of samples kept out for monitoring.
    dtype : str
        Parameter precision, ``"float32"`` or ``"float64"``.
    random_state : int
    """

    def __init__(
        self,
        otfs=None,
        hidden=(512, 512),
        epochs=100,
        batch_size=1000,
        lr=1e-3,
        lr_drop=0.5,
        lr_period=10,
        holdout=0.05,
        dtype="float32",
        random_state=0,
    ):
        self.otfs = otfs
        self.hidden = hidden
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.lr_drop = lr_drop
        self.lr_period = lr_period
        self.holdout = holdout
        self.dtype = dtype
        self.random_state = random_state

    def _train_config(self, n):
        return TrainConfig(
            num_samples=n,
            batch=self.batch_size,
            epochs=self.epochs,
            lr0=self.lr,
            lr_drop=self.lr_drop,
            lr_period=self.lr_period,
            holdout=self.holdout,
            seed=self.random_state,
        )

    def fit(self, X, Y):
        cfg = self.otfs or OtfsConfig()
        X = check_pairs(X)
        Y = np.asarray(Y)
        if Y.shape != (len(X), cfg.MN):
            raise ValueError(f"Y must have shape ({len(X)}, {cfg.MN}), got {Y.shape}")
        Xn = NormalizationSpec.for_config(cfg).normalize(X[:, 0], X[:, 1])
        rng = np.random.default_rng(self.random_state)
        self.pair_, self.history_ = train_pair(
            cfg, self.hidden, Xn, Y, self._train_config(len(X)), rng, dtype=np.dtype(self.dtype)
        )
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "pair_")
        X = check_pairs(X)
        return self.pair_.predict_tf(X[:, 0], X[:, 1])

    def score(self, X, Y, sample_weight=None):
        """Mean over samples of ``1 - ||pred - Y||^2 / ||Y||^2``."""
        pred = self.predict(X)
        Y = np.asarray(Y)
        err = np.sum(np.abs(pred - Y) ** 2, axis=1) / np.sum(np.abs(Y) ** 2, axis=1)
        return float(np.mean(1 - err))


@dataclass(frozen=True)
class LatencySizing:
    ok: bool
    product_ok: bool
    wide_ok: bool
    bound: int


def validate_latency_sizing(cfg: OtfsConfig, L1: int, L2: int) -> LatencySizing:
    """Check ``L1 L2 < N^3 M^4 / 2`` and ``L1, L2 > MN``.

    The product bound makes the two networks (about ``2 L1 L2``
    multiply-adds) cheaper than brute-force column evaluation; the width
    condition is where that estimate applies. Integer arithmetic, so the
    boundary is exact.
    """
    work = cfg.N**3 * cfg.M**4
    product_ok = 2 * int(L1) * int(L2) < work
    wide_ok = L1 > cfg.MN and L2 > cfg.MN
    return LatencySizing(product_ok and wide_ok, product_ok, wide_ok, work)
