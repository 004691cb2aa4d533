"""Feature extraction and enhancement wiring shared by training, evaluation
and the command line.

Tasks:
    DNS       masking channel = mic, features = |mic|
    AEC       masking channel = mic, features = [|mic| ; |farend|]
    AEC_LAEC  masking channel = LAEC output, features = [|laec| ; |farend|]

The mask is always applied to the masking channel.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from gru_enhance.dsp.core import DEFAULT_STFT, SAMPLE_RATE, StftConfig, apply_mask, istft, stft
from gru_enhance.errors import ConfigMismatchError, InvalidConfigError, InvalidInputError
from gru_enhance.laec.canceller import LaecConfig, LaecResult, cancel
from gru_enhance.mixgen.mixer import MixtureCase
from gru_enhance.neuralnet.checkpoint import Checkpoint, load_checkpoint
from gru_enhance.neuralnet.model import GruState, ModelParams, forward, forward_step
from gru_enhance.objectives.losses import DEFAULT_VAD_THRESHOLD_DB, VadFrames, vad_frames

logger = logging.getLogger(__name__)

TASKS = ("DNS", "AEC", "AEC_LAEC")
CHANNELS_BY_TASK = {"DNS": 1, "AEC": 2, "AEC_LAEC": 2}


def check_task(task: str) -> str:
    if task not in TASKS:
        raise InvalidConfigError(f"task must be one of {TASKS}, got {task!r}")
    return task


@dataclass
class TrainingItem:
    """Everything the loss needs for one mixture.

    Attributes:
        features: Network input (frames, channels * bins).
        x: Complex spectrogram of the masking channel.
        c: Complex clean spectrogram.
        clean_vad: Frame VAD of the clean magnitudes.
        primary_source: "mic" or "laec".
        laec: LAEC result when the masking channel came from the canceller.
    """

    features: np.ndarray
    x: np.ndarray
    c: np.ndarray
    clean_vad: VadFrames
    primary_source: str
    task: str
    laec: Optional[LaecResult] = None

    @property
    def x_mag(self) -> np.ndarray:
        return np.abs(self.x)

    @property
    def frames(self) -> int:
        return self.x.shape[0]


def _primary_channel(
    mic: np.ndarray, farend: Optional[np.ndarray], task: str, laec_cfg: Optional[LaecConfig]
) -> tuple[np.ndarray, str, Optional[LaecResult]]:
    check_task(task)
    if task == "DNS":
        return mic, "mic", None
    if farend is None:
        raise InvalidInputError(f"task {task} needs a far-end reference signal")
    if task == "AEC":
        return mic, "mic", None
    result = cancel(mic, farend, laec_cfg)
    return result.out[: mic.shape[0]], "laec", result


def build_features(
    primary_spec: np.ndarray, farend: Optional[np.ndarray], stft_cfg: StftConfig
) -> np.ndarray:
    """Magnitude features; the far-end magnitude is appended along bins."""
    mag = np.abs(primary_spec)
    if farend is None:
        return mag
    ref = np.abs(stft(farend, stft_cfg))
    if ref.shape != mag.shape:
        raise InvalidInputError(f"far-end spectrogram {ref.shape} does not match mic {mag.shape}")
    return np.concatenate([mag, ref], axis=-1)


def prepare_item(
    case: MixtureCase,
    task: str = "DNS",
    stft_cfg: StftConfig = DEFAULT_STFT,
    laec_cfg: Optional[LaecConfig] = None,
    vad_threshold_db: float = DEFAULT_VAD_THRESHOLD_DB,
) -> TrainingItem:
    """Turn a mixture into network features, spectrograms and the clean VAD."""
    farend = case.farend if CHANNELS_BY_TASK[check_task(task)] == 2 else None
    primary, source, laec = _primary_channel(case.mic, farend, task, laec_cfg)
    x = stft(primary, stft_cfg)
    c = stft(case.clean, stft_cfg)
    return TrainingItem(
        features=build_features(x, farend, stft_cfg),
        x=x,
        c=c,
        clean_vad=vad_frames(np.abs(c), vad_threshold_db),
        primary_source=source,
        task=task,
        laec=laec,
    )


def collate(items: Sequence[TrainingItem]) -> tuple[np.ndarray, np.ndarray]:
    """Stack features, zero-padding to the longest item.

    Returns:
        (features (B, T, D), frame_mask (B, T)) with False on padded frames.
    """
    t_max = max(item.frames for item in items)
    dim = items[0].features.shape[-1]
    feats = np.zeros((len(items), t_max, dim))
    mask = np.zeros((len(items), t_max), dtype=bool)
    for i, item in enumerate(items):
        feats[i, : item.frames] = item.features
        mask[i, : item.frames] = True
    return feats, mask


def load_model(
    path: Union[str, Path], task: Optional[str] = None, stft_cfg: StftConfig = DEFAULT_STFT
) -> Checkpoint:
    """Load a checkpoint and check it fits the task and STFT settings.

    Raises:
        ConfigMismatchError: Wrong channel count or STFT size.
    """
    channels = CHANNELS_BY_TASK[check_task(task)] if task else None
    ckpt = load_checkpoint(path, channels=channels)
    if ckpt.arch.output_bins != stft_cfg.bins:
        raise ConfigMismatchError(
            f"checkpoint predicts {ckpt.arch.output_bins} bins, STFT gives {stft_cfg.bins}"
        )
    stored_task = ckpt.meta.get("task")
    if task and stored_task and stored_task != task:
        logger.warning("checkpoint was trained for %s, running as %s", stored_task, task)
    return ckpt


@dataclass
class EnhanceResult:
    out: np.ndarray
    mask: np.ndarray
    primary_source: str
    elapsed_s: float
    realtime_factor: float
    laec: Optional[LaecResult] = None


def predict_mask(params: ModelParams, features: np.ndarray, streaming: bool = True) -> np.ndarray:
    """Mask for one utterance, frame by frame or in one batched pass."""
    if not streaming:
        mask, _ = forward(params, features, keep_cache=False)
        return np.asarray(mask)
    state = GruState.zeros(params.arch, None, params.dtype)
    out = np.empty((features.shape[0], params.arch.output_bins), dtype=params.dtype)
    for t in range(features.shape[0]):
        out[t], state = forward_step(params, features[t], state)
    return out


def enhance_waveform(
    params: ModelParams,
    mic: np.ndarray,
    farend: Optional[np.ndarray] = None,
    task: Optional[str] = None,
    stft_cfg: StftConfig = DEFAULT_STFT,
    laec_cfg: Optional[LaecConfig] = None,
    streaming: bool = True,
) -> EnhanceResult:
    """Enhance one recording.

    Args:
        params: Network parameters.
        mic: Microphone signal.
        farend: Far-end reference (two-channel models only).
        task: DNS / AEC / AEC_LAEC; inferred from the channel count when omitted
            (two channels default to AEC_LAEC).
        stft_cfg: STFT parameters.
        laec_cfg: Canceller parameters for AEC_LAEC.
        streaming: Run the network one frame at a time.

    Raises:
        ConfigMismatchError: Task and model channel count disagree.
        InvalidInputError: A two-channel model got no far-end signal.
    """
    mic = np.asarray(mic, dtype=np.float64)
    channels = params.arch.channels
    task = task or ("DNS" if channels == 1 else "AEC_LAEC")
    if CHANNELS_BY_TASK[check_task(task)] != channels:
        raise ConfigMismatchError(f"task {task} needs a {CHANNELS_BY_TASK[task]}-channel model, got {channels}")
    if channels == 1:
        farend = None

    start = time.perf_counter()
    primary, source, laec = _primary_channel(mic, farend, task, laec_cfg)
    x = stft(primary, stft_cfg)
    features = build_features(x, farend, stft_cfg)
    mask = predict_mask(params, features, streaming)
    out = istft(apply_mask(x, mask.astype(np.float64)), stft_cfg, length=mic.shape[0])
    elapsed = time.perf_counter() - start
    duration = mic.shape[0] / SAMPLE_RATE
    return EnhanceResult(
        out=out,
        mask=mask,
        primary_source=source,
        elapsed_s=elapsed,
        realtime_factor=elapsed / duration if duration else float("inf"),
        laec=laec,
    )


__all__ = [
    "TASKS",
    "CHANNELS_BY_TASK",
    "TrainingItem",
    "EnhanceResult",
    "prepare_item",
    "build_features",
    "collate",
    "load_model",
    "predict_mask",
    "enhance_waveform",
]
