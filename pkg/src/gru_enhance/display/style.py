"""Role-based ANSI styling for command output.

Output is styled by what it reports (a finished command, a failed check, a
table title) rather than by color name. Whether styling is applied is decided
each time text is painted, so redirecting stdout mid-run or passing
--no-color takes effect without re-importing anything.
"""

from __future__ import annotations

import os
import sys
from enum import Enum
from typing import Optional, TextIO

NO_COLOR_ENV = "GRU_ENHANCE_NO_COLOR"
RESET = "\033[0m"


class Role(str, Enum):
    """What a piece of output means, mapped to its ANSI code."""

    DONE = "\033[92m"  # outputs written, checks passed
    NOTICE = "\033[93m"  # low-confidence estimates, suggestions, interrupts
    FAILURE = "\033[91m"  # errors, failed checks, non-finite losses
    TITLE = "\033[1m"  # table heads, architecture names
    VALUE = "\033[96m"  # running loss
    BAR = "\033[94m"
    TRACK = "\033[90m"


_override: Optional[bool] = None


def set_color(enabled: Optional[bool]) -> None:
    """Force styling on or off; None returns to terminal detection."""
    global _override
    _override = enabled


def color_enabled(stream: Optional[TextIO] = None) -> bool:
    """Whether painted text carries ANSI codes.

    An explicit set_color wins. Otherwise styling needs GRU_ENHANCE_NO_COLOR
    unset and the stream (stdout by default) attached to a terminal.
    """
    if _override is not None:
        return _override
    if os.environ.get(NO_COLOR_ENV):
        return False
    stream = stream if stream is not None else sys.stdout
    isatty = getattr(stream, "isatty", None)
    return bool(isatty and isatty())


def paint(text: str, role: Role) -> str:
    if not text or not color_enabled():
        return text
    return f"{role.value}{text}{RESET}"


def verdict(passed: bool) -> Role:
    return Role.DONE if passed else Role.FAILURE


__all__ = ["Role", "RESET", "NO_COLOR_ENV", "set_color", "color_enabled", "paint", "verdict"]
