"""Projection targets, mask losses and their gradients.

The clean magnitude is generally not reachable by a mask in [0, 1]: where
noise partially cancels speech the mixture magnitude is smaller than the
clean magnitude. The losses here therefore supervise a projected target
C' that never exceeds the mixture magnitude, so that a mask reaching zero
loss always exists.

Every reduction is an arithmetic mean over frames x bins. An optional
per-frame boolean mask removes padded frames from both the sum and the
element count.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from gru_enhance.errors import AttainabilityViolation, InvalidConfigError, ShapeError

logger = logging.getLogger(__name__)

EPS = 1e-12
DEFAULT_VAD_THRESHOLD_DB = -40.0
MASK_TOLERANCE = 1e-12


class ProjectionMode(str, Enum):
    """How the clean spectrogram is projected onto the mixture."""

    PER_BIN_COMPLEX = "per_bin_complex"
    PER_FRAME_VECTOR = "per_frame_vector"
    LITERAL_ELEMENTWISE = "literal_elementwise"

    @property
    def attainable(self) -> bool:
        return self is not ProjectionMode.LITERAL_ELEMENTWISE


class LossMode(str, Enum):
    """Training objective.

    PROJECTED is the plain projected MSE. The two VAD variants add a
    frame-gated speech term and a residual-noise term.
    """

    PROJECTED = "projected"
    VAD_INTERPRETED = "vad_interpreted"
    VAD_LITERAL = "vad_literal"


@dataclass(frozen=True)
class LossConfig:
    loss: LossMode = LossMode.VAD_INTERPRETED
    projection: ProjectionMode = ProjectionMode.PER_BIN_COMPLEX
    vad_threshold_db: float = DEFAULT_VAD_THRESHOLD_DB

    def __post_init__(self) -> None:
        try:
            object.__setattr__(self, "loss", LossMode(self.loss))
            object.__setattr__(self, "projection", ProjectionMode(self.projection))
        except ValueError as e:
            raise InvalidConfigError(str(e)) from e
        if self.vad_threshold_db > 0:
            raise InvalidConfigError(f"vad_threshold_db must be <= 0, got {self.vad_threshold_db}")


@dataclass(frozen=True)
class TargetSpectrogram:
    """Projected clean magnitude C' and the mode that produced it."""

    c_proj: np.ndarray
    mode: ProjectionMode = ProjectionMode.PER_BIN_COMPLEX

    @property
    def shape(self) -> tuple[int, ...]:
        return self.c_proj.shape


@dataclass(frozen=True)
class VadFrames:
    active: np.ndarray
    threshold_db: float = DEFAULT_VAD_THRESHOLD_DB

    def __len__(self) -> int:
        return int(self.active.shape[0])

    def as_weights(self) -> np.ndarray:
        """Per-frame 0/1 column vector for broadcasting over bins."""
        return self.active.astype(np.float64)[:, None]


@dataclass(frozen=True)
class LossReport:
    speech_term: float
    noise_term: float = 0.0

    @property
    def total(self) -> float:
        return self.speech_term + self.noise_term

    def as_dict(self) -> dict[str, float]:
        return {"total": self.total, "speech_term": self.speech_term, "noise_term": self.noise_term}


def _check_shapes(*arrays: np.ndarray) -> None:
    shapes = {np.shape(a) for a in arrays}
    if len(shapes) != 1:
        raise ShapeError(f"shapes differ: {sorted(shapes)}")


def _safe_div(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    return np.divide(num, den, out=np.zeros(np.broadcast(num, den).shape), where=den >= EPS)


def projection_target(
    x: np.ndarray, c: np.ndarray, mode: ProjectionMode | str = ProjectionMode.PER_BIN_COMPLEX
) -> TargetSpectrogram:
    """Project the clean spectrogram onto the masking channel.

    Args:
        x: Complex spectrogram of the masking channel (frames, bins).
        c: Complex clean spectrogram, same shape.
        mode: Projection reading.

    Returns:
        TargetSpectrogram. In attainable modes 0 <= C' <= |x| everywhere.

    Raises:
        ShapeError: If shapes differ.
    """
    _check_shapes(x, c)
    mode = ProjectionMode(mode)
    x_mag = np.abs(x)

    if mode is ProjectionMode.PER_BIN_COMPLEX:
        along = _safe_div(np.real(c * np.conj(x)), x_mag)
        c_proj = np.clip(along, 0.0, x_mag)
    elif mode is ProjectionMode.PER_FRAME_VECTOR:
        c_mag = np.abs(c)
        num = np.sum(x_mag * c_mag, axis=-1, keepdims=True)
        den = np.sum(x_mag * x_mag, axis=-1, keepdims=True)
        c_proj = np.clip(_safe_div(num, den), 0.0, 1.0) * x_mag
    else:
        c_proj = _safe_div(np.abs(c) ** 2, x_mag)
    return TargetSpectrogram(c_proj=c_proj, mode=mode)


def target_mask(t: TargetSpectrogram, x_mag: np.ndarray, strict: bool = True) -> np.ndarray:
    """Mask that reproduces the target exactly: C' / |X|, with 0/0 -> 0.

    Args:
        t: Projected target.
        x_mag: Mixture magnitude.
        strict: Raise on entries above 1; otherwise clip them and log the count.

    Raises:
        AttainabilityViolation: Some entries exceed 1 and strict is set.
    """
    _check_shapes(t.c_proj, x_mag)
    mask = _safe_div(t.c_proj, x_mag)
    over = mask > 1.0 + MASK_TOLERANCE
    count = int(np.count_nonzero(over))
    if count:
        if strict:
            raise AttainabilityViolation(
                f"{count} target mask values exceed 1 ({t.mode.value} projection)", count=count
            )
        logger.debug("clipping %d unattainable target mask values", count)
    return np.clip(mask, 0.0, 1.0)


def _frame_weights(frames: int, frame_mask: Optional[np.ndarray]) -> tuple[np.ndarray, int]:
    if frame_mask is None:
        return np.ones((frames, 1)), frames
    fm = np.asarray(frame_mask, dtype=bool)
    if fm.shape != (frames,):
        raise ShapeError(f"frame mask has shape {fm.shape}, expected ({frames},)")
    return fm.astype(np.float64)[:, None], int(np.count_nonzero(fm))


def _mean_sq(diff: np.ndarray, weights: np.ndarray, n_frames: int) -> float:
    n = n_frames * diff.shape[-1]
    if n == 0:
        return 0.0
    return float(np.sum(weights * diff * diff) / n)


def projected_mse(
    t: TargetSpectrogram, x_mag: np.ndarray, p: np.ndarray, frame_mask: Optional[np.ndarray] = None
) -> LossReport:
    """Mean of (C' - |X| * P)^2."""
    _check_shapes(t.c_proj, x_mag, p)
    w, n = _frame_weights(x_mag.shape[0], frame_mask)
    return LossReport(speech_term=_mean_sq(x_mag * p - t.c_proj, w, n))


def magnitude_mse(
    c_mag: np.ndarray, x_mag: np.ndarray, p: np.ndarray, frame_mask: Optional[np.ndarray] = None
) -> LossReport:
    """Unprojected baseline: mean of (|C| - |X| * P)^2."""
    _check_shapes(c_mag, x_mag, p)
    w, n = _frame_weights(x_mag.shape[0], frame_mask)
    return LossReport(speech_term=_mean_sq(x_mag * p - c_mag, w, n))


def vad_frames(ref_mag: np.ndarray, threshold_db: float = DEFAULT_VAD_THRESHOLD_DB) -> VadFrames:
    """Energy VAD relative to the loudest frame.

    A frame is active when it carries energy and its level is at least the
    loudest frame's level plus threshold_db. Ties at the boundary are active;
    an all-silent clip has no active frames.
    """
    ref_mag = np.asarray(ref_mag, dtype=np.float64)
    energy = np.sum(ref_mag * ref_mag, axis=-1)
    if energy.size == 0:
        return VadFrames(active=np.zeros(0, dtype=bool), threshold_db=threshold_db)
    level = 10.0 * np.log10(energy + EPS)
    active = (energy > EPS) & (level >= level.max() + threshold_db)
    return VadFrames(active=active, threshold_db=threshold_db)


def vad_projected_loss(
    t: TargetSpectrogram,
    x_mag: np.ndarray,
    p: np.ndarray,
    vad: Optional[VadFrames] = None,
    mode: str = "interpreted",
    frame_mask: Optional[np.ndarray] = None,
    threshold_db: float = DEFAULT_VAD_THRESHOLD_DB,
) -> LossReport:
    """Projected loss with a VAD-gated speech term and a noise term.

    interpreted:
        speech = MSE(C', V * |X| * P), noise = MSE(|X| - C', |X| * (1 - P)),
        V from the clean reference (falls back to C' when vad is None).
    literal:
        Y = |X| * P; speech = MSE(C', VAD(Y) * Y), noise = MSE(|X| - C', |X| * Y).
    """
    _check_shapes(t.c_proj, x_mag, p)
    if mode not in ("interpreted", "literal"):
        raise InvalidConfigError(f"VAD loss mode must be 'interpreted' or 'literal', got {mode!r}")
    w, n = _frame_weights(x_mag.shape[0], frame_mask)
    y = x_mag * p
    if vad is None:
        vad = vad_frames(t.c_proj if mode == "interpreted" else y, threshold_db)
    if len(vad) != x_mag.shape[0]:
        raise ShapeError(f"VAD has {len(vad)} frames, spectrogram has {x_mag.shape[0]}")
    v = vad.as_weights()

    speech = _mean_sq(v * y - t.c_proj, w, n)
    if mode == "interpreted":
        noise = _mean_sq(x_mag * (1.0 - p) - (x_mag - t.c_proj), w, n)
    else:
        noise = _mean_sq(x_mag * y - (x_mag - t.c_proj), w, n)
    return LossReport(speech_term=speech, noise_term=noise)


def compute_loss(
    t: TargetSpectrogram,
    x_mag: np.ndarray,
    p: np.ndarray,
    config: LossConfig,
    vad: Optional[VadFrames] = None,
    frame_mask: Optional[np.ndarray] = None,
) -> LossReport:
    """Evaluate the configured objective."""
    if config.loss is LossMode.PROJECTED:
        return projected_mse(t, x_mag, p, frame_mask)
    mode = "interpreted" if config.loss is LossMode.VAD_INTERPRETED else "literal"
    return vad_projected_loss(t, x_mag, p, vad, mode, frame_mask, config.vad_threshold_db)


def loss_grad_wrt_mask(
    t: TargetSpectrogram,
    x_mag: np.ndarray,
    p: np.ndarray,
    config: LossConfig,
    vad: Optional[VadFrames] = None,
    frame_mask: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Analytic dL/dP for the configured objective.

    The VAD is treated as a constant of the mask, as in compute_loss when
    the same vad is passed to both.

    Returns:
        Gradient array of shape (frames, bins).
    """
    _check_shapes(t.c_proj, x_mag, p)
    w, n_frames = _frame_weights(x_mag.shape[0], frame_mask)
    n = n_frames * x_mag.shape[-1]
    if n == 0:
        return np.zeros_like(x_mag, dtype=np.float64)
    y = x_mag * p
    c = t.c_proj

    if config.loss is LossMode.PROJECTED:
        grad = 2.0 * (y - c) * x_mag
    else:
        if vad is None:
            ref = c if config.loss is LossMode.VAD_INTERPRETED else y
            vad = vad_frames(ref, config.vad_threshold_db)
        v = vad.as_weights()
        grad = 2.0 * (v * y - c) * v * x_mag
        if config.loss is LossMode.VAD_INTERPRETED:
            # |X|(1-P) - (|X| - C') == C' - |X|P
            grad = grad + 2.0 * (y - c) * x_mag
        else:
            grad = grad + 2.0 * (x_mag * y - (x_mag - c)) * x_mag * x_mag
    return w * grad / n


__all__ = [
    "EPS",
    "ProjectionMode",
    "LossMode",
    "LossConfig",
    "TargetSpectrogram",
    "VadFrames",
    "LossReport",
    "projection_target",
    "target_mask",
    "projected_mse",
    "magnitude_mse",
    "vad_frames",
    "vad_projected_loss",
    "compute_loss",
    "loss_grad_wrt_mask",
]
