"""Time-frequency analysis and synthesis.

Modules:
    core: STFT / iSTFT, magnitude and mask application
"""

from gru_enhance.dsp.core import (
    DEFAULT_STFT,
    SAMPLE_RATE,
    StftConfig,
    apply_mask,
    istft,
    magnitude,
    stft,
)

__all__ = [
    "SAMPLE_RATE",
    "StftConfig",
    "DEFAULT_STFT",
    "stft",
    "istft",
    "magnitude",
    "apply_mask",
]
