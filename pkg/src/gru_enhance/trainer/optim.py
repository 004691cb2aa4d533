"""Adaptive-moment optimizer and gradient clipping over ModelParams."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from gru_enhance.errors import ShapeError
from gru_enhance.neuralnet.model import ModelParams


@dataclass
class AdamState:
    """First and second moments plus the step counter."""

    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def zeros(cls, params: ModelParams) -> AdamState:
        return cls(
            0,
            {k: np.zeros_like(t) for k, t in params.items()},
            {k: np.zeros_like(t) for k, t in params.items()},
        )

    def to_tensors(self) -> dict[str, np.ndarray]:
        out = {f"adam.m.{k}": t for k, t in self.m.items()}
        out.update({f"adam.v.{k}": t for k, t in self.v.items()})
        return out

    @classmethod
    def from_tensors(cls, step: int, tensors: dict[str, np.ndarray]) -> AdamState:
        m = {k[len("adam.m.") :]: t.copy() for k, t in tensors.items() if k.startswith("adam.m.")}
        v = {k[len("adam.v.") :]: t.copy() for k, t in tensors.items() if k.startswith("adam.v.")}
        return cls(step, m, v)


def adam_step(
    params: ModelParams,
    grads: ModelParams,
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> tuple[ModelParams, AdamState]:
    """One bias-corrected Adam update.

    Returns:
        (new params, new state); the inputs are left untouched.
    """
    if set(grads.tensors) != set(params.tensors):
        raise ShapeError("gradient names do not match parameter names")
    if not state.m:
        state = AdamState.zeros(params)
    t = state.step + 1
    new_params, new_m, new_v = {}, {}, {}
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeError(f"{name}: gradient shape {g.shape} != parameter shape {p.shape}")
        m = beta1 * state.m[name] + (1.0 - beta1) * g
        v = beta2 * state.v[name] + (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1**t)
        v_hat = v / (1.0 - beta2**t)
        new_params[name] = (p - lr * m_hat / (np.sqrt(v_hat) + eps)).astype(p.dtype)
        new_m[name] = m.astype(p.dtype)
        new_v[name] = v.astype(p.dtype)
    return ModelParams(params.arch, new_params), AdamState(t, new_m, new_v)


def global_norm(grads: ModelParams) -> float:
    return float(np.sqrt(sum(float(np.sum(np.square(g, dtype=np.float64))) for _, g in grads.items())))


def clip_grad_norm(grads: ModelParams, max_norm: float) -> tuple[ModelParams, float]:
    """Rescale grads so their global L2 norm is at most max_norm.

    Returns:
        (clipped grads, norm before clipping).
    """
    norm = global_norm(grads)
    if max_norm <= 0 or norm <= max_norm or not np.isfinite(norm):
        return grads, norm
    scale = max_norm / norm
    return ModelParams(grads.arch, {k: (g * scale).astype(g.dtype) for k, g in grads.items()}), norm


__all__ = ["AdamState", "adam_step", "clip_grad_norm", "global_norm"]
