"""End-to-end finite-difference check of loss + network gradients.

Runs a tiny float64 network (8 bins, hidden 8, 5 frames) and compares the
analytic gradient of every parameter coordinate with a central difference.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from gru_enhance.neuralnet.model import ArchConfig, ModelParams, backward, forward, init_params
from gru_enhance.objectives.losses import (
    LossConfig,
    LossMode,
    ProjectionMode,
    TargetSpectrogram,
    VadFrames,
    compute_loss,
    loss_grad_wrt_mask,
    projection_target,
    vad_frames,
)

logger = logging.getLogger(__name__)

TINY_ARCH = ArchConfig(output_bins=8, hidden=8, channels=1, name="tiny")
TINY_FRAMES = 5
STEP = 1e-5
TOLERANCE = 1e-5
# Gradients smaller than this are judged by absolute error against
# TOLERANCE * GRAD_FLOOR; relative error is undefined near zero.
GRAD_FLOOR = 1e-3


@dataclass
class GradCheckReport:
    loss: LossMode
    projection: ProjectionMode
    max_rel_error: float
    checked: int
    tolerance: float = TOLERANCE
    max_abs_error: float = 0.0
    small_coordinates: int = 0
    floor: float = GRAD_FLOOR
    worst: list[tuple[str, tuple[int, ...], float, float, float]] = field(default_factory=list)

    @property
    def abs_tolerance(self) -> float:
        return self.tolerance * self.floor

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance and self.max_abs_error < self.abs_tolerance

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (
            f"{status} {self.loss.value:16s} {self.projection.value:20s} "
            f"max rel err {self.max_rel_error:.2e} over {self.checked - self.small_coordinates} coordinates, "
            f"max abs err {self.max_abs_error:.2e} over {self.small_coordinates} below {self.floor:g}"
        )


@dataclass
class _Problem:
    params: ModelParams
    features: np.ndarray
    x_mag: np.ndarray
    target: TargetSpectrogram
    vad: VadFrames
    config: LossConfig


def _make_problem(loss: LossMode, projection: ProjectionMode, seed: int, arch: ArchConfig) -> _Problem:
    rng = np.random.default_rng(seed)
    shape = (TINY_FRAMES, arch.output_bins)
    x = rng.uniform(0.8, 2.0, shape) * np.exp(1j * rng.uniform(-np.pi, np.pi, shape))
    c = 0.5 * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    params = init_params(arch, seed, dtype=np.float64)
    # non-zero biases so every bias coordinate carries gradient
    for _, t in params.items():
        if t.ndim == 1:
            t[...] = rng.uniform(-0.1, 0.1, t.shape)
    target = projection_target(x, c, projection)
    config = LossConfig(loss, projection)
    x_mag = np.abs(x)
    features = x_mag if arch.channels == 1 else np.concatenate([x_mag] * arch.channels, axis=-1)
    if loss is LossMode.VAD_LITERAL:
        mask, _ = forward(params, features, keep_cache=False)
        vad = vad_frames(x_mag * mask, config.vad_threshold_db)
    else:
        vad = vad_frames(np.abs(c), config.vad_threshold_db)
    return _Problem(params, features, x_mag, target, vad, config)


def coordinate_error(analytic: float, numeric: float, floor: float = GRAD_FLOOR) -> tuple[Optional[float], float]:
    """Relative and absolute disagreement of one gradient coordinate.

    The relative error is None when both gradients are smaller than floor.
    """
    diff = abs(analytic - numeric)
    scale = max(abs(analytic), abs(numeric))
    return (diff / scale if scale >= floor else None), diff


def _loss(problem: _Problem, params: ModelParams) -> float:
    mask, _ = forward(params, problem.features, keep_cache=False)
    return compute_loss(problem.target, problem.x_mag, mask, problem.config, problem.vad).total


def grad_check(
    loss: LossMode | str = LossMode.PROJECTED,
    projection: ProjectionMode | str = ProjectionMode.PER_BIN_COMPLEX,
    seed: int = 0,
    h: float = STEP,
    tolerance: float = TOLERANCE,
    arch: Optional[ArchConfig] = None,
    top: int = 5,
) -> GradCheckReport:
    """Compare analytic and central-difference gradients for one mode pair.

    Returns:
        Report with the largest relative error over gradients of at least
        GRAD_FLOOR, the largest absolute error over smaller ones, and the
        worst coordinates as (tensor, index, analytic, numeric, error). The
        error is relative, or absolute for coordinates below the floor.
    """
    loss, projection = LossMode(loss), ProjectionMode(projection)
    problem = _make_problem(loss, projection, seed, arch or TINY_ARCH)
    params = problem.params

    mask, cache = forward(params, problem.features)
    dmask = loss_grad_wrt_mask(problem.target, problem.x_mag, mask, problem.config, problem.vad)
    grads = backward(params, cache, dmask)

    errors: list[tuple[str, tuple[int, ...], float, float, float]] = []
    scores: list[float] = []
    max_rel = max_abs = 0.0
    small = 0
    for name, tensor in params.items():
        for idx in itertools.product(*(range(s) for s in tensor.shape)):
            orig = tensor[idx]
            tensor[idx] = orig + h
            up = _loss(problem, params)
            tensor[idx] = orig - h
            down = _loss(problem, params)
            tensor[idx] = orig
            numeric = (up - down) / (2.0 * h)
            analytic = float(grads[name][idx])
            rel, diff = coordinate_error(analytic, numeric)
            if rel is None:
                small += 1
                max_abs = max(max_abs, diff)
                errors.append((name, idx, analytic, numeric, diff))
                scores.append(diff / GRAD_FLOOR)
            else:
                max_rel = max(max_rel, rel)
                errors.append((name, idx, analytic, numeric, rel))
                scores.append(rel)

    order = np.argsort(scores, kind="stable")[::-1]
    report = GradCheckReport(
        loss=loss,
        projection=projection,
        max_rel_error=max_rel,
        checked=len(errors),
        tolerance=tolerance,
        max_abs_error=max_abs,
        small_coordinates=small,
        worst=[errors[i] for i in order[:top]],
    )
    if not report.passed:
        logger.warning("gradient check failed: %s; worst %s", report.summary(), report.worst)
    return report


def grad_check_all(seed: int = 0, h: float = STEP, tolerance: float = TOLERANCE) -> list[GradCheckReport]:
    """Every (loss, projection) combination."""
    return [
        grad_check(loss, projection, seed, h, tolerance)
        for loss in LossMode
        for projection in ProjectionMode
    ]


__all__ = ["GradCheckReport", "coordinate_error", "grad_check", "grad_check_all", "TINY_ARCH", "GRAD_FLOOR"]
