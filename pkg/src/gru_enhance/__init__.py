"""GRU Enhance - lightweight amplitude-mask speech enhancement and echo cancellation.

This package provides the signal chain (STFT, mixture synthesis, linear echo
cancellation), the projection-based training objectives, a two-layer GRU mask
estimator with training and gradient checking, and intrusive evaluation.
"""

from gru_enhance._version import __version__
from gru_enhance.cli import create_parser, main, print_version

__all__ = [
    "__version__",
    "create_parser",
    "main",
    "print_version",
]
