"""Training objectives on magnitude spectrograms.

Modules:
    losses: Projection targets, projected / VAD losses and mask gradients
"""

from gru_enhance.objectives.losses import (
    LossConfig,
    LossMode,
    LossReport,
    ProjectionMode,
    TargetSpectrogram,
    VadFrames,
    compute_loss,
    loss_grad_wrt_mask,
    magnitude_mse,
    projected_mse,
    projection_target,
    target_mask,
    vad_frames,
    vad_projected_loss,
)

__all__ = [
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
