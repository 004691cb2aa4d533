"""Progress bars and compact summaries for command output."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from gru_enhance.display.style import Role, paint


def make_progress_bar(fraction: float, width: int = 25) -> str:
    """Create a visual progress bar with block characters.

    Args:
        fraction: Completed fraction (0-1); clamped.
        width: Width of the bar in characters.

    Returns:
        Colored string representation of the progress bar.
    """
    fraction = min(max(fraction, 0.0), 1.0)
    filled = int(width * fraction)
    empty = width - filled
    return paint("█" * filled, Role.BAR) + paint("░" * empty, Role.TRACK)


def format_step(step: int, total: int, loss: float, lr: float, width: int = 25) -> str:
    """One training progress line: bar, step counter, loss and learning rate."""
    bar = make_progress_bar(step / total if total else 1.0, width)
    loss_text = paint(f"{loss:.4g}", Role.VALUE if math.isfinite(loss) else Role.FAILURE)
    return f"{bar} {step}/{total}  loss {loss_text}  lr {lr:.2e}"


def format_count(n: float) -> str:
    """Human-readable count: 3415809 -> "3.42M", 921601 -> "0.92M"."""
    if n >= 1e5:
        return f"{n / 1e6:.2f}M"
    if n >= 1e3:
        return f"{n / 1e3:.1f}K"
    return str(int(n))


def format_gmacs(macs_per_second: float) -> str:
    """MAC rate in GMAC/s with two significant digits: "0.21", "0.057"."""
    g = macs_per_second / 1e9
    if g <= 0:
        return "0"
    digits = max(0, 1 - int(math.floor(math.log10(g))))
    return f"{g:.{digits}f}"


def snr_histogram(values: Sequence[float], bins: int = 6, width: int = 30) -> list[str]:
    """Text histogram of SNR values, one row per bin.

    Returns:
        Rows like "[-15.0, -10.0)  ████  7".
    """
    if len(values) == 0:
        return []
    arr = np.asarray(values, dtype=np.float64)
    lo, hi = float(arr.min()), float(arr.max())
    if hi <= lo:
        hi = lo + 1.0
    counts, edges = np.histogram(arr, bins=bins, range=(lo, hi))
    peak = max(int(counts.max()), 1)
    rows = []
    for i, count in enumerate(counts):
        close = "]" if i == len(counts) - 1 else ")"
        label = f"[{edges[i]:6.1f}, {edges[i + 1]:6.1f}{close}"
        bar = "█" * int(round(width * count / peak))
        rows.append(f"{label}  {paint(bar, Role.BAR)} {int(count)}")
    return rows


__all__ = ["make_progress_bar", "format_step", "format_count", "format_gmacs", "snr_histogram"]
