"""Time-frequency analysis, synthesis and mask application.

Spectrograms are laid out frames x bins. Frames are centered: the signal is
reflect-padded by fft_size/2 on both ends so that frame i is centered on
sample i * hop.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import get_window

from gru_enhance.errors import (
    ConfigMismatchError,
    InvalidConfigError,
    InvalidInputError,
    InvalidMaskError,
    ShapeError,
)

SAMPLE_RATE = 16000


@dataclass(frozen=True)
class StftConfig:
    """STFT parameters.

    Defaults (512 / 256 / periodic Hann) give 257 bins and 62.5 frames per
    second at 16 kHz.
    """

    fft_size: int = 512
    hop: int = 256
    window: str = "hann"

    def __post_init__(self) -> None:
        if self.fft_size <= 0 or self.fft_size & (self.fft_size - 1):
            raise InvalidConfigError(f"fft_size must be a power of two, got {self.fft_size}")
        if not 0 < self.hop <= self.fft_size:
            raise InvalidConfigError(f"hop must be in (0, fft_size], got {self.hop}")

    @property
    def bins(self) -> int:
        return self.fft_size // 2 + 1

    @property
    def frame_rate(self) -> float:
        """Frames per second at the pipeline sample rate."""
        return SAMPLE_RATE / self.hop

    def analysis_window(self) -> np.ndarray:
        # fftbins=True gives the periodic variant
        return get_window(self.window, self.fft_size, fftbins=True)

    def num_frames(self, num_samples: int) -> int:
        """Frame count produced by stft for a signal of num_samples."""
        padded = num_samples + 2 * (self.fft_size // 2)
        return (padded - self.fft_size) // self.hop + 1


DEFAULT_STFT = StftConfig()


def _check_waveform(w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 1:
        raise InvalidInputError(f"waveform must be one-dimensional, got shape {w.shape}")
    if w.size == 0:
        raise InvalidInputError("waveform is empty")
    if not np.all(np.isfinite(w)):
        raise InvalidInputError("waveform contains NaN or Inf")
    return w


def stft(w: np.ndarray, cfg: StftConfig = DEFAULT_STFT) -> np.ndarray:
    """Short-time Fourier transform with centered frames.

    Args:
        w: Mono waveform at 16 kHz.
        cfg: STFT parameters.

    Returns:
        Complex array of shape (frames, bins).

    Raises:
        InvalidInputError: If the waveform is empty or non-finite.
    """
    w = _check_waveform(w)
    pad = cfg.fft_size // 2
    mode = "reflect" if w.size > 1 else "constant"
    padded = np.pad(w, pad, mode=mode)
    frames = sliding_window_view(padded, cfg.fft_size)[:: cfg.hop]
    return np.fft.rfft(frames * cfg.analysis_window(), axis=-1)


def istft(s: np.ndarray, cfg: StftConfig = DEFAULT_STFT, length: int | None = None) -> np.ndarray:
    """Inverse STFT by weighted overlap-add.

    The synthesis window equals the analysis window and the output is
    normalized by the summed squared window, which inverts stft exactly
    wherever that sum is non-zero.

    Args:
        s: Complex spectrogram (frames, bins).
        cfg: STFT parameters used for analysis.
        length: Output length in samples. Defaults to (frames - 1) * hop.

    Returns:
        Real waveform.

    Raises:
        ConfigMismatchError: If the bin count does not match cfg.
    """
    s = np.asarray(s)
    if s.ndim != 2 or s.shape[1] != cfg.bins:
        raise ConfigMismatchError(
            f"spectrogram has shape {s.shape}, expected (frames, {cfg.bins}) for fft_size {cfg.fft_size}"
        )
    n_frames = s.shape[0]
    win = cfg.analysis_window()
    pad = cfg.fft_size // 2
    total = cfg.fft_size + cfg.hop * max(n_frames - 1, 0)

    frames = np.fft.irfft(s, n=cfg.fft_size, axis=-1) * win
    out = np.zeros(total)
    norm = np.zeros(total)
    win_sq = win**2
    for i in range(n_frames):
        start = i * cfg.hop
        out[start : start + cfg.fft_size] += frames[i]
        norm[start : start + cfg.fft_size] += win_sq

    nonzero = norm > 1e-11
    out[nonzero] /= norm[nonzero]

    if length is None:
        length = cfg.hop * max(n_frames - 1, 0)
    out = out[pad : pad + length]
    if out.size < length:
        out = np.pad(out, (0, length - out.size))
    return out


def magnitude(s: np.ndarray) -> np.ndarray:
    """Elementwise complex modulus."""
    return np.abs(s)


def apply_mask(x: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Scale a complex spectrogram by a proportional mask, keeping the phase.

    Args:
        x: Complex spectrogram (frames, bins).
        p: Mask of the same shape with entries in [0, 1].

    Returns:
        Masked complex spectrogram; its magnitude is |x| * p.

    Raises:
        ShapeError: If shapes differ.
        InvalidMaskError: If any mask value lies outside [0, 1] or is NaN.
    """
    p = np.asarray(p)
    if x.shape != p.shape:
        raise ShapeError(f"mask shape {p.shape} does not match spectrogram shape {x.shape}")
    if not np.all((p >= 0.0) & (p <= 1.0)):
        bad = int(np.count_nonzero(~((p >= 0.0) & (p <= 1.0))))
        raise InvalidMaskError(f"{bad} mask values outside [0, 1]")
    return x * p


__all__ = [
    "SAMPLE_RATE",
    "StftConfig",
    "DEFAULT_STFT",
    "stft",
    "istft",
    "magnitude",
    "apply_mask",
]
