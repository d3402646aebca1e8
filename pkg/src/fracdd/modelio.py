"""Model file reader/writer.

Layout (version 1)::

    FRACDD-FNN\\n
    key=value\\n            one per line, ASCII
    ...
    end_header\\n
    <payload>

Header keys: ``version, M, N, delta_f, E_p, m_p, n_p, layer_dims``
(comma-separated), ``tau_scale, nu_scale``, ``dtype`` (always
``float32-le``). Floats are written with ``repr`` so they round-trip.

The payload is little-endian IEEE-754 float32. The real-part network comes
first, then the imaginary-part network; each network stores, for layers
1..3 in order, the weight matrix row-major (``out x in``) followed by the
bias vector. The payload length must be exactly
``4 * 2 * sum(out * in + out)`` bytes.
"""

from __future__ import annotations

import os

import numpy as np

from .neural import FnnModel, NormalizationSpec, PredictorPair
from .otfs import OtfsConfig

MAGIC = b"FRACDD-FNN\n"
END = b"end_header\n"
VERSION = 1
_LE_F32 = np.dtype("<f4")

__all__ = ["ModelFormatError", "save_model", "load_model"]


class ModelFormatError(ValueError):
    pass


def _header(pair: PredictorPair) -> bytes:
    cfg = pair.cfg
    fields = {
        "version": VERSION,
        "M": cfg.M,
        "N": cfg.N,
        "delta_f": repr(float(cfg.delta_f)),
        "E_p": repr(float(cfg.E_p)),
        "m_p": cfg.m_p,
        "n_p": cfg.n_p,
        "layer_dims": ",".join(str(d) for d in pair.layer_dims),
        "tau_scale": repr(float(pair.norm.tau_scale)),
        "nu_scale": repr(float(pair.norm.nu_scale)),
        "dtype": "float32-le",
    }
    return MAGIC + "".join(f"{k}={v}\n" for k, v in fields.items()).encode("ascii") + END


def save_model(pair: PredictorPair, path) -> None:
    blocks = []
    for model in (pair.fnn_real, pair.fnn_imag):
        for W, b in zip(model.weights, model.biases):
            blocks.append(np.ascontiguousarray(W, dtype=_LE_F32).tobytes())
            blocks.append(np.ascontiguousarray(b, dtype=_LE_F32).tobytes())
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(_header(pair))
        for blk in blocks:
            fh.write(blk)
    os.replace(tmp, path)


def _parse_header(fh) -> dict:
    if fh.readline() != MAGIC:
        raise ModelFormatError("not a model file (bad magic line)")
    fields = {}
    for _ in range(64):
        line = fh.readline()
        if not line:
            raise ModelFormatError("truncated header")
        if line == END:
            return fields
        try:
            key, value = line.decode("ascii").rstrip("\n").split("=", 1)
        except (UnicodeDecodeError, ValueError):
            raise ModelFormatError(f"malformed header line {line[:40]!r}") from None
        fields[key] = value
    raise ModelFormatError("header too long or missing end marker")


def _check_geometry(cfg: OtfsConfig, expected: OtfsConfig | None) -> None:
    if expected is None:
        return
    mismatches = [
        name
        for name in ("M", "N", "delta_f", "E_p", "m_p", "n_p")
        if getattr(cfg, name) != getattr(expected, name)
    ]
    if mismatches:
        detail = ", ".join(f"{n}: file={getattr(cfg, n)} expected={getattr(expected, n)}" for n in mismatches)
        raise ModelFormatError(f"model geometry does not match estimator config ({detail})")


def load_model(path, expected_cfg: OtfsConfig | None = None) -> PredictorPair:
    """Read a model file; optionally require it to match `expected_cfg`."""
    with open(path, "rb") as fh:
        h = _parse_header(fh)
        payload = fh.read()
    try:
        if int(h["version"]) != VERSION:
            raise ModelFormatError(f"unsupported model version {h['version']}")
        if h.get("dtype") != "float32-le":
            raise ModelFormatError(f"unsupported dtype {h.get('dtype')!r}")
        delta_f = float(h["delta_f"])
        cfg = OtfsConfig(
            M=int(h["M"]),
            N=int(h["N"]),
            delta_f=delta_f,
            T=1.0 / delta_f,
            E_p=float(h["E_p"]),
            m_p=int(h["m_p"]),
            n_p=int(h["n_p"]),
        )
        dims = [int(d) for d in h["layer_dims"].split(",")]
        norm = NormalizationSpec(float(h["tau_scale"]), float(h["nu_scale"]))
    except KeyError as exc:
        raise ModelFormatError(f"missing header key {exc}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ModelFormatError):
            raise
        raise ModelFormatError(f"invalid header value: {exc}") from None
    if len(dims) != 4 or dims[0] != 2 or dims[-1] != cfg.M * cfg.N or min(dims) <= 0:
        raise ModelFormatError(f"layer_dims {dims} inconsistent with a 2-hidden-layer net for MN={cfg.MN}")
    _check_geometry(cfg, expected_cfg)

    per_net = sum(o * i + o for i, o in zip(dims[:-1], dims[1:]))
    expected_bytes = 2 * per_net * _LE_F32.itemsize
    if len(payload) != expected_bytes:
        raise ModelFormatError(f"payload is {len(payload)} bytes, expected {expected_bytes} (truncated or corrupt)")
    flat = np.frombuffer(payload, dtype=_LE_F32).astype(np.float32)
    if not np.all(np.isfinite(flat)):
        raise ModelFormatError("payload contains non-finite parameters")

    nets, pos = [], 0
    for _ in range(2):
        weights, biases = [], []
        for i, o in zip(dims[:-1], dims[1:]):
            weights.append(flat[pos : pos + o * i].reshape(o, i).copy())
            pos += o * i
            biases.append(flat[pos : pos + o].copy())
            pos += o
        nets.append(FnnModel(weights, biases))
    return PredictorPair(nets[0], nets[1], cfg, norm)
