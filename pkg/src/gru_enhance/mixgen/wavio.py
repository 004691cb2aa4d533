"""PCM16 mono 16 kHz WAV reading and writing.

Samples are scaled by 1/32768 on read; writing is the exact inverse with
round-half-even and saturation at the int16 limits.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Union

import numpy as np
import soundfile as sf

from gru_enhance.dsp.core import SAMPLE_RATE
from gru_enhance.errors import CorruptFileError, InvalidInputError, UnsupportedFormatError

PathLike = Union[str, Path]

PCM_SCALE = 32768.0


def _check_riff_header(path: Path) -> None:
    """Reject files whose RIFF size field promises more bytes than exist."""
    try:
        with open(path, "rb") as f:
            header = f.read(12)
    except OSError as e:
        raise CorruptFileError(f"Cannot read {path}: {e}") from e
    if len(header) < 12:
        raise CorruptFileError(f"{path} is too short to be a WAV file")
    riff, riff_size, wave = struct.unpack("<4sI4s", header)
    if riff != b"RIFF" or wave != b"WAVE":
        raise UnsupportedFormatError(f"{path} is not a RIFF/WAVE file")
    if path.stat().st_size < riff_size + 8:
        raise CorruptFileError(
            f"{path} is truncated",
            details=f"header declares {riff_size + 8} bytes, file has {path.stat().st_size}",
        )


def load_wav(path: PathLike) -> np.ndarray:
    """Load a PCM16 mono 16 kHz WAV file.

    Args:
        path: File to read.

    Returns:
        float64 samples in [-1, 1).

    Raises:
        UnsupportedFormatError: Wrong sample rate, channel count or encoding.
        CorruptFileError: Truncated or unreadable file.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"No such file: {path}")
    _check_riff_header(path)
    try:
        info = sf.info(str(path))
    except RuntimeError as e:
        raise CorruptFileError(f"Cannot parse {path}: {e}") from e

    if info.samplerate != SAMPLE_RATE:
        raise UnsupportedFormatError(
            f"{path} has sample rate {info.samplerate} Hz, expected {SAMPLE_RATE} Hz"
        )
    if info.channels != 1:
        raise UnsupportedFormatError(f"{path} has {info.channels} channels, expected mono")
    if info.subtype != "PCM_16":
        raise UnsupportedFormatError(f"{path} is {info.subtype}, expected PCM_16")

    try:
        data, _ = sf.read(str(path), dtype="int16", always_2d=False)
    except RuntimeError as e:
        raise CorruptFileError(f"Cannot decode {path}: {e}") from e
    if data.shape[0] != info.frames:
        raise CorruptFileError(f"{path} is truncated: read {data.shape[0]} of {info.frames} frames")
    return data.astype(np.float64) / PCM_SCALE


def to_pcm16(samples: np.ndarray) -> np.ndarray:
    """Quantize float samples to int16 with saturation."""
    scaled = np.round(np.asarray(samples, dtype=np.float64) * PCM_SCALE)
    return np.clip(scaled, -32768, 32767).astype(np.int16)


def write_wav(path: PathLike, samples: np.ndarray) -> None:
    """Write float samples as PCM16 mono 16 kHz.

    Args:
        path: Destination file; parent directories are created.
        samples: Mono float samples, nominally in [-1, 1).

    Raises:
        InvalidInputError: If samples are not one-dimensional or not finite.
    """
    samples = np.asarray(samples)
    if samples.ndim != 1:
        raise InvalidInputError(f"expected mono samples, got shape {samples.shape}")
    if not np.all(np.isfinite(samples)):
        raise InvalidInputError("cannot write NaN or Inf samples")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    sf.write(str(path), to_pcm16(samples), SAMPLE_RATE, subtype="PCM_16", format="WAV")


def wav_duration(path: PathLike) -> float:
    """Duration in seconds from the file header."""
    try:
        info = sf.info(str(path))
    except RuntimeError as e:
        raise CorruptFileError(f"Cannot parse {path}: {e}") from e
    return info.frames / info.samplerate


__all__ = ["PCM_SCALE", "load_wav", "write_wav", "to_pcm16", "wav_duration"]
