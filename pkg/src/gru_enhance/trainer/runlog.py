"""Append-only JSON-lines training log with size-based rotation.

One record per optimizer step (step, loss components, grad norm, lr, wall
time) plus occasional event records (validation, checkpoint, abort).
"""

from __future__ import annotations

import json
import logging
import math
import os
import threading
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Optional, Union

logger = logging.getLogger(__name__)

RUNLOG_FILE = "train_log.jsonl"
RUNLOG_MAX_SIZE_MB = 10
RUNLOG_MAX_FILES = 5


class RunEvent:
    """Event type constants."""

    STEP = "step"
    VALIDATION = "validation"
    CHECKPOINT = "checkpoint"
    RESUME = "resume"
    ABORT = "abort"
    INTERRUPT = "interrupt"
    DONE = "done"


def _jsonable(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if hasattr(value, "item"):
        return _jsonable(value.item())
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    return value


class RunLog:
    """Line-delimited JSON log for one training run."""

    def __init__(
        self,
        path: Union[str, Path],
        max_size_mb: float = RUNLOG_MAX_SIZE_MB,
        max_files: int = RUNLOG_MAX_FILES,
    ):
        self.path = Path(path)
        self.max_size_mb = max_size_mb
        self.max_files = max_files
        self._lock = threading.Lock()
        self.path.parent.mkdir(parents=True, exist_ok=True)

    def _rotate(self) -> None:
        if not self.path.exists():
            return
        try:
            if self.path.stat().st_size / (1024 * 1024) < self.max_size_mb:
                return
            for i in range(self.max_files - 1, 0, -1):
                old = self.path.with_name(f"{self.path.name}.{i}")
                if old.exists():
                    if i + 1 >= self.max_files:
                        old.unlink()
                    else:
                        old.rename(self.path.with_name(f"{self.path.name}.{i + 1}"))
            self.path.rename(self.path.with_name(f"{self.path.name}.1"))
        except OSError as e:
            logger.warning("could not rotate run log %s, appending to it: %s", self.path, e)

    def record(self, event: str = RunEvent.STEP, **fields: Any) -> dict[str, Any]:
        """Append one record and return it."""
        entry = {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "event": event,
            "pid": os.getpid(),
            **{k: _jsonable(v) for k, v in fields.items()},
        }
        with self._lock:
            self._rotate()
            with open(self.path, "a", encoding="utf-8") as f:
                f.write(json.dumps(entry) + "\n")
        return entry

    def step(
        self,
        step: int,
        loss: dict[str, float],
        grad_norm: float,
        lr: float,
        wall_time: float,
        **extra: Any,
    ) -> dict[str, Any]:
        return self.record(
            RunEvent.STEP, step=step, loss=loss, grad_norm=grad_norm, lr=lr, wall_time=wall_time, **extra
        )


def read_records(path: Union[str, Path], event: Optional[str] = None) -> list[dict[str, Any]]:
    """Read a run log, skipping malformed lines.

    Args:
        path: Log file.
        event: Keep only records of this event type.
    """
    path = Path(path)
    if not path.exists():
        return []
    records = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            try:
                entry = json.loads(line)
            except json.JSONDecodeError:
                continue
            if event is None or entry.get("event") == event:
                records.append(entry)
    return records


__all__ = ["RunLog", "RunEvent", "read_records", "RUNLOG_FILE"]
