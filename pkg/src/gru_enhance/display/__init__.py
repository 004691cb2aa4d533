"""Display components for terminal output.

Modules:
    style: Role-based ANSI styling and color detection
    progress: Progress bars, counts and histograms
"""

from gru_enhance.display.progress import (
    format_count,
    format_gmacs,
    format_step,
    make_progress_bar,
    snr_histogram,
)
from gru_enhance.display.style import Role, color_enabled, paint, set_color, verdict

__all__ = [
    "Role",
    "paint",
    "verdict",
    "set_color",
    "color_enabled",
    "make_progress_bar",
    "format_step",
    "format_count",
    "format_gmacs",
    "snr_histogram",
]
