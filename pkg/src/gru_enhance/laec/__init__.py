"""Linear acoustic echo cancellation.

Modules:
    canceller: Delay estimation, partitioned-block NLMS and ERLE
"""

from gru_enhance.laec.canceller import (
    DelayEstimate,
    LaecConfig,
    LaecResult,
    PartitionedBlockNlms,
    cancel,
    erle,
    estimate_delay,
)

__all__ = [
    "LaecConfig",
    "LaecResult",
    "DelayEstimate",
    "PartitionedBlockNlms",
    "estimate_delay",
    "cancel",
    "erle",
]
