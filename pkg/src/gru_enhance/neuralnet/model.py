"""Mask-prediction network: input linear, two residual GRU layers, output
linear with sigmoid.

Per frame t::

    a    = W_in f_t + b_in
    r1   = GRU1(a) + a
    r2   = GRU2(r1) + r1
    mask = sigmoid(W_out r2 + b_out)

GRU gates follow the usual reset / update / candidate convention with
separate input and recurrent biases, stored concatenated in that order::

    r = sigmoid(x Wx_r + bx_r + h Wh_r + bh_r)
    z = sigmoid(x Wx_z + bx_z + h Wh_z + bh_z)
    n = tanh(x Wx_n + bx_n + r * (h Wh_n + bh_n))
    h' = (1 - z) * n + z * h

Arrays are batch-major: features (B, T, D), masks (B, T, bins). Unbatched
(T, D) input is accepted and returns (T, bins).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Iterator, Optional

import numpy as np
from scipy.special import expit

from gru_enhance.dsp.core import DEFAULT_STFT
from gru_enhance.errors import InvalidConfigError, InvalidStateError, ShapeError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ArchConfig:
    """Network shape.

    Attributes:
        output_bins: Mask width (257 for a 512-point FFT).
        hidden: GRU width; the input linear maps features to this width.
        channels: 1 (masking channel only) or 2 (plus far-end reference).
        ffn_hidden: Width of an optional ReLU layer before the output linear; 0 disables it.
        log_compress: Apply log1p to magnitudes before the input linear.
        name: Preset name, or "custom".
    """

    output_bins: int = 257
    hidden: int = 512
    channels: int = 1
    ffn_hidden: int = 0
    log_compress: bool = True
    name: str = "custom"

    def __post_init__(self) -> None:
        if self.hidden <= 0:
            raise InvalidConfigError(f"hidden must be positive, got {self.hidden}")
        if self.output_bins <= 0:
            raise InvalidConfigError(f"output_bins must be positive, got {self.output_bins}")
        if self.channels not in (1, 2):
            raise InvalidConfigError(f"channels must be 1 or 2, got {self.channels}")
        if self.ffn_hidden < 0:
            raise InvalidConfigError(f"ffn_hidden must be >= 0, got {self.ffn_hidden}")

    @property
    def input_bins(self) -> int:
        return self.channels * self.output_bins

    def to_dict(self) -> dict:
        return {
            "output_bins": self.output_bins,
            "hidden": self.hidden,
            "channels": self.channels,
            "ffn_hidden": self.ffn_hidden,
            "log_compress": self.log_compress,
            "name": self.name,
        }

    @classmethod
    def from_dict(cls, data: dict) -> ArchConfig:
        return cls(**{k: data[k] for k in cls.__dataclass_fields__ if k in data})


ARCH_PRESETS: dict[str, ArchConfig] = {
    "GRU-512": ArchConfig(hidden=512, channels=1, name="GRU-512"),
    "GRU-256": ArchConfig(hidden=256, channels=1, name="GRU-256"),
    "GRU-320": ArchConfig(hidden=320, channels=2, name="GRU-320"),
}


def arch_from_name(name: str, **overrides) -> ArchConfig:
    """Look up a preset; "custom" builds from overrides alone."""
    if name == "custom":
        return ArchConfig(name="custom", **overrides)
    if name not in ARCH_PRESETS:
        raise InvalidConfigError(
            f"unknown architecture {name!r}", suggestion=f"Use one of {sorted(ARCH_PRESETS)} or custom."
        )
    return replace(ARCH_PRESETS[name], **overrides)


@dataclass
class ModelParams:
    """Named parameter tensors in a fixed order."""

    arch: ArchConfig
    tensors: dict[str, np.ndarray] = field(default_factory=dict)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self.tensors)

    def items(self):
        return self.tensors.items()

    @property
    def dtype(self) -> np.dtype:
        return next(iter(self.tensors.values())).dtype

    @property
    def size(self) -> int:
        return int(sum(t.size for t in self.tensors.values()))

    def copy(self) -> ModelParams:
        return ModelParams(self.arch, {k: v.copy() for k, v in self.tensors.items()})

    def astype(self, dtype) -> ModelParams:
        return ModelParams(self.arch, {k: v.astype(dtype) for k, v in self.tensors.items()})

    def zeros_like(self) -> ModelParams:
        return ModelParams(self.arch, {k: np.zeros_like(v) for k, v in self.tensors.items()})


@dataclass
class GruState:
    """Recurrent state of both layers, shape (hidden,) or (B, hidden)."""

    h1: np.ndarray
    h2: np.ndarray

    @classmethod
    def zeros(cls, arch: ArchConfig, batch: Optional[int] = None, dtype=np.float32) -> GruState:
        shape = (arch.hidden,) if batch is None else (batch, arch.hidden)
        return cls(np.zeros(shape, dtype=dtype), np.zeros(shape, dtype=dtype))


@dataclass
class _GruCache:
    x: np.ndarray
    h_prev: np.ndarray
    r: np.ndarray
    z: np.ndarray
    n: np.ndarray
    hn: np.ndarray


@dataclass
class ForwardCache:
    """Activations kept by a training-mode forward for backward."""

    features: np.ndarray
    a: np.ndarray
    gru1: _GruCache
    r1: np.ndarray
    gru2: _GruCache
    r2: np.ndarray
    u: Optional[np.ndarray]
    mask: np.ndarray
    final_state: GruState
    unbatched: bool = False


def _layer_names(arch: ArchConfig) -> list[tuple[str, tuple[int, ...], int]]:
    """(name, shape, fan_in) in storage order; fan_in 0 marks a bias."""
    d, h, o, f = arch.input_bins, arch.hidden, arch.output_bins, arch.ffn_hidden
    names = [("input.weight", (d, h), d), ("input.bias", (h,), 0)]
    for layer in ("gru1", "gru2"):
        names += [
            (f"{layer}.weight_x", (h, 3 * h), h),
            (f"{layer}.weight_h", (h, 3 * h), h),
            (f"{layer}.bias_x", (3 * h,), 0),
            (f"{layer}.bias_h", (3 * h,), 0),
        ]
    head_in = h
    if f:
        names += [("ffn.weight", (h, f), h), ("ffn.bias", (f,), 0)]
        head_in = f
    names += [("output.weight", (head_in, o), head_in), ("output.bias", (o,), 0)]
    return names


def init_params(cfg: ArchConfig, seed: int = 0, dtype=np.float32) -> ModelParams:
    """Uniform(-k, k) weights with k = 1/sqrt(fan_in); zero biases."""
    rng = np.random.default_rng(seed)
    tensors: dict[str, np.ndarray] = {}
    for name, shape, fan_in in _layer_names(cfg):
        if fan_in:
            k = 1.0 / np.sqrt(fan_in)
            tensors[name] = rng.uniform(-k, k, size=shape).astype(dtype)
        else:
            tensors[name] = np.zeros(shape, dtype=dtype)
    return ModelParams(cfg, tensors)


def count_parameters(input_bins: int, hidden: int, output_bins: int, ffn_hidden: int = 0) -> int:
    """Closed-form parameter count."""
    gru = 2 * (2 * 3 * hidden * hidden + 2 * 3 * hidden)
    head_in = ffn_hidden or hidden
    ffn = hidden * ffn_hidden + ffn_hidden if ffn_hidden else 0
    return input_bins * hidden + hidden + gru + ffn + head_in * output_bins + output_bins


def param_count(cfg: ArchConfig) -> int:
    return count_parameters(cfg.input_bins, cfg.hidden, cfg.output_bins, cfg.ffn_hidden)


def macs_per_frame(cfg: ArchConfig) -> int:
    h = cfg.hidden
    head = h * cfg.ffn_hidden + cfg.ffn_hidden * cfg.output_bins if cfg.ffn_hidden else h * cfg.output_bins
    return cfg.input_bins * h + 2 * (3 * h * h + 3 * h * h) + head


def macs_per_second(cfg: ArchConfig, frame_rate: float = DEFAULT_STFT.frame_rate) -> float:
    """Multiply-accumulates per second of audio at frame_rate."""
    return macs_per_frame(cfg) * frame_rate


def compress(features: np.ndarray, arch: ArchConfig) -> np.ndarray:
    return np.log1p(features) if arch.log_compress else features


def _gru_step(x_t, h, wx, wh, bx, bh):
    hid = wh.shape[0]
    gx = x_t @ wx + bx
    gh = h @ wh + bh
    r = expit(gx[..., :hid] + gh[..., :hid])
    z = expit(gx[..., hid : 2 * hid] + gh[..., hid : 2 * hid])
    hn = gh[..., 2 * hid :]
    n = np.tanh(gx[..., 2 * hid :] + r * hn)
    return (1.0 - z) * n + z * h, r, z, n, hn


def _gru_sequence(x: np.ndarray, h0: np.ndarray, params: ModelParams, layer: str):
    wx, wh = params[f"{layer}.weight_x"], params[f"{layer}.weight_h"]
    bx, bh = params[f"{layer}.bias_x"], params[f"{layer}.bias_h"]
    b, t_len, _ = x.shape
    hid = wh.shape[0]
    out = np.empty((b, t_len, hid), dtype=x.dtype)
    h_prev = np.empty_like(out)
    r_all, z_all, n_all, hn_all = (np.empty_like(out) for _ in range(4))
    h = h0
    for t in range(t_len):
        h_prev[:, t] = h
        h, r_all[:, t], z_all[:, t], n_all[:, t], hn_all[:, t] = _gru_step(x[:, t], h, wx, wh, bx, bh)
        out[:, t] = h
    return out, h, _GruCache(x, h_prev, r_all, z_all, n_all, hn_all)


def _check_features(params: ModelParams, features: np.ndarray) -> tuple[np.ndarray, bool]:
    features = np.asarray(features)
    unbatched = features.ndim == 2
    if unbatched:
        features = features[None]
    if features.ndim != 3 or features.shape[-1] != params.arch.input_bins:
        raise ShapeError(
            f"features have shape {np.shape(features)}, expected (..., frames, {params.arch.input_bins})"
        )
    return features.astype(params.dtype, copy=False), unbatched


def _mask_head(logits: np.ndarray) -> np.ndarray:
    """Sigmoid held strictly inside (0, 1) at the working precision."""
    info = np.finfo(logits.dtype)
    one = info.dtype.type(1)
    return np.clip(expit(logits), info.tiny, one - info.epsneg)


def forward(
    params: ModelParams,
    features: np.ndarray,
    state: Optional[GruState] = None,
    keep_cache: bool = True,
) -> tuple[np.ndarray, Optional[ForwardCache]]:
    """Run the network over whole sequences.

    Args:
        params: Network parameters.
        features: Magnitudes (B, T, input_bins) or (T, input_bins).
        state: Initial recurrent state; zeros when omitted.
        keep_cache: Keep activations for backward (training mode).

    Returns:
        (mask, cache). Mask entries lie in (0, 1); cache is None unless keep_cache.

    Raises:
        ShapeError: If the feature width differs from arch.input_bins.
    """
    arch = params.arch
    features, unbatched = _check_features(params, features)
    batch = features.shape[0]
    if state is None:
        state = GruState.zeros(arch, batch, params.dtype)

    f = compress(features, arch)
    a = f @ params["input.weight"] + params["input.bias"]
    g1, h1, c1 = _gru_sequence(a, np.broadcast_to(state.h1, (batch, arch.hidden)), params, "gru1")
    r1 = g1 + a
    g2, h2, c2 = _gru_sequence(r1, np.broadcast_to(state.h2, (batch, arch.hidden)), params, "gru2")
    r2 = g2 + r1
    u = None
    head = r2
    if arch.ffn_hidden:
        u = np.maximum(r2 @ params["ffn.weight"] + params["ffn.bias"], 0.0)
        head = u
    mask = _mask_head(head @ params["output.weight"] + params["output.bias"])

    cache = None
    if keep_cache:
        cache = ForwardCache(f, a, c1, r1, c2, r2, u, mask, GruState(h1, h2), unbatched)
    return (mask[0] if unbatched else mask), cache


def forward_step(
    params: ModelParams, f_t: np.ndarray, state: GruState
) -> tuple[np.ndarray, GruState]:
    """Process one frame; the streaming counterpart of forward."""
    arch = params.arch
    f_t = np.asarray(f_t, dtype=params.dtype)
    if f_t.shape[-1] != arch.input_bins:
        raise ShapeError(f"frame has {f_t.shape[-1]} bins, expected {arch.input_bins}")
    a = compress(f_t, arch) @ params["input.weight"] + params["input.bias"]
    g1 = _gru_step(a, state.h1, params["gru1.weight_x"], params["gru1.weight_h"],
                   params["gru1.bias_x"], params["gru1.bias_h"])[0]
    r1 = g1 + a
    g2 = _gru_step(r1, state.h2, params["gru2.weight_x"], params["gru2.weight_h"],
                   params["gru2.bias_x"], params["gru2.bias_h"])[0]
    r2 = g2 + r1
    head = r2
    if arch.ffn_hidden:
        head = np.maximum(r2 @ params["ffn.weight"] + params["ffn.bias"], 0.0)
    mask = _mask_head(head @ params["output.weight"] + params["output.bias"])
    return mask, GruState(g1, g2)


def _gru_backward(
    dh_out: np.ndarray, cache: _GruCache, params: ModelParams, layer: str, grads: dict
) -> np.ndarray:
    """Backprop through time for one layer; returns d(input sequence)."""
    wx, wh = params[f"{layer}.weight_x"], params[f"{layer}.weight_h"]
    hid = wh.shape[0]
    b, t_len, _ = dh_out.shape
    dgx = np.empty((b, t_len, 3 * hid), dtype=dh_out.dtype)
    dgh = np.empty_like(dgx)
    dh_next = np.zeros((b, hid), dtype=dh_out.dtype)
    for t in range(t_len - 1, -1, -1):
        r, z, n, hn = cache.r[:, t], cache.z[:, t], cache.n[:, t], cache.hn[:, t]
        dh = dh_out[:, t] + dh_next
        dn_pre = dh * (1.0 - z) * (1.0 - n * n)
        dz_pre = dh * (cache.h_prev[:, t] - n) * z * (1.0 - z)
        dr_pre = dn_pre * hn * r * (1.0 - r)
        dgx[:, t, :hid] = dr_pre
        dgx[:, t, hid : 2 * hid] = dz_pre
        dgx[:, t, 2 * hid :] = dn_pre
        dgh[:, t, : 2 * hid] = dgx[:, t, : 2 * hid]
        dgh[:, t, 2 * hid :] = dn_pre * r
        dh_next = dh * z + dgh[:, t] @ wh.T

    grads[f"{layer}.weight_x"] = np.einsum("btd,btk->dk", cache.x, dgx)
    grads[f"{layer}.weight_h"] = np.einsum("btd,btk->dk", cache.h_prev, dgh)
    grads[f"{layer}.bias_x"] = dgx.sum(axis=(0, 1))
    grads[f"{layer}.bias_h"] = dgh.sum(axis=(0, 1))
    return dgx @ wx.T


def backward(
    params: ModelParams, cache: Optional[ForwardCache], dmask: np.ndarray
) -> ModelParams:
    """Exact reverse-mode gradients of a scalar loss given dL/dmask.

    Raises:
        InvalidStateError: If cache is None (forward ran without keep_cache).
    """
    if cache is None:
        raise InvalidStateError("backward needs the cache of a training-mode forward")
    dmask = np.asarray(dmask, dtype=params.dtype)
    if cache.unbatched:
        dmask = dmask[None]
    if dmask.shape != cache.mask.shape:
        raise ShapeError(f"mask gradient has shape {dmask.shape}, expected {cache.mask.shape}")

    grads: dict[str, np.ndarray] = {}
    mask = cache.mask
    dlogit = dmask * mask * (1.0 - mask)
    head = cache.u if cache.u is not None else cache.r2
    grads["output.weight"] = np.einsum("btd,btk->dk", head, dlogit)
    grads["output.bias"] = dlogit.sum(axis=(0, 1))
    dhead = dlogit @ params["output.weight"].T
    if cache.u is not None:
        du = dhead * (cache.u > 0)
        grads["ffn.weight"] = np.einsum("btd,btk->dk", cache.r2, du)
        grads["ffn.bias"] = du.sum(axis=(0, 1))
        dr2 = du @ params["ffn.weight"].T
    else:
        dr2 = dhead

    dr1 = dr2 + _gru_backward(dr2, cache.gru2, params, "gru2", grads)
    da = dr1 + _gru_backward(dr1, cache.gru1, params, "gru1", grads)
    grads["input.weight"] = np.einsum("btd,btk->dk", cache.features, da)
    grads["input.bias"] = da.sum(axis=(0, 1))
    return ModelParams(params.arch, {name: grads[name].astype(params.dtype) for name in params})


__all__ = [
    "ArchConfig",
    "ARCH_PRESETS",
    "arch_from_name",
    "ModelParams",
    "GruState",
    "ForwardCache",
    "init_params",
    "count_parameters",
    "param_count",
    "macs_per_frame",
    "macs_per_second",
    "forward",
    "forward_step",
    "backward",
]
