"""Mask-prediction network.

Modules:
    model: Architecture, forward / streaming step / backward, cost accounting
    checkpoint: Hashed binary checkpoints
"""

from gru_enhance.neuralnet.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from gru_enhance.neuralnet.model import (
    ARCH_PRESETS,
    ArchConfig,
    ForwardCache,
    GruState,
    ModelParams,
    arch_from_name,
    backward,
    forward,
    forward_step,
    init_params,
    macs_per_second,
    param_count,
)

__all__ = [
    # Model
    "ArchConfig",
    "ARCH_PRESETS",
    "arch_from_name",
    "ModelParams",
    "GruState",
    "ForwardCache",
    "init_params",
    "forward",
    "forward_step",
    "backward",
    "param_count",
    "macs_per_second",
    # Checkpoints
    "Checkpoint",
    "save_checkpoint",
    "load_checkpoint",
]
