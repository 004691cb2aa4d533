"""Training engine.

Modules:
    optim: Adam and gradient clipping
    loop: TrainConfig, online-mixing training, validation, resume
    gradcheck: Finite-difference gradient validation
    runlog: JSON-lines training log
"""

from gru_enhance.trainer.gradcheck import GradCheckReport, grad_check, grad_check_all
from gru_enhance.trainer.loop import TrainConfig, TrainResult, resume_state, train, validate
from gru_enhance.trainer.optim import AdamState, adam_step, clip_grad_norm
from gru_enhance.trainer.runlog import RunLog, read_records

__all__ = [
    # Optimizer
    "AdamState",
    "adam_step",
    "clip_grad_norm",
    # Loop
    "TrainConfig",
    "TrainResult",
    "train",
    "validate",
    "resume_state",
    # Gradient check
    "GradCheckReport",
    "grad_check",
    "grad_check_all",
    # Logging
    "RunLog",
    "read_records",
]
