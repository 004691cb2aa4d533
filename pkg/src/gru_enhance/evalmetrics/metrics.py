"""Intrusive objective metrics: STOI, ESTOI, SI-SDR and segmental SNR.

All functions take (clean, processed) 16 kHz waveforms of equal length.
"""

from __future__ import annotations

import numpy as np
from pystoi import stoi as _pystoi

from gru_enhance.dsp.core import SAMPLE_RATE
from gru_enhance.errors import DegenerateSignalError, InvalidInputError, TooShortError

MIN_STOI_SAMPLES = SAMPLE_RATE
SI_SDR_CAP_DB = 60.0
SEG_SNR_FRAME = 256
SEG_SNR_RANGE_DB = (-10.0, 35.0)
_EPS = 1e-12


def _pair(clean: np.ndarray, processed: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    clean = np.asarray(clean, dtype=np.float64).ravel()
    processed = np.asarray(processed, dtype=np.float64).ravel()
    if clean.shape != processed.shape:
        raise InvalidInputError(
            f"clean and processed lengths differ ({clean.shape[0]} vs {processed.shape[0]})"
        )
    if not (np.all(np.isfinite(clean)) and np.all(np.isfinite(processed))):
        raise InvalidInputError("metric inputs contain non-finite samples")
    return clean, processed


def _intelligibility(clean: np.ndarray, processed: np.ndarray, extended: bool) -> float:
    clean, processed = _pair(clean, processed)
    if clean.shape[0] < MIN_STOI_SAMPLES:
        raise TooShortError(
            f"intelligibility needs at least 1 s of audio, got {clean.shape[0] / SAMPLE_RATE:.2f} s"
        )
    value = float(_pystoi(clean, processed, SAMPLE_RATE, extended=extended))
    if not np.isfinite(value):
        return 0.0
    return float(np.clip(value, 0.0, 1.0))


def stoi(clean: np.ndarray, processed: np.ndarray) -> float:
    """Short-time objective intelligibility in [0, 1].

    Raises:
        TooShortError: Clip shorter than one second.
        InvalidInputError: Lengths differ or samples are non-finite.
    """
    return _intelligibility(clean, processed, extended=False)


def estoi(clean: np.ndarray, processed: np.ndarray) -> float:
    """Extended STOI in [0, 1]; same preconditions as stoi."""
    return _intelligibility(clean, processed, extended=True)


def si_sdr(clean: np.ndarray, processed: np.ndarray) -> float:
    """Scale-invariant signal-to-distortion ratio in dB, capped at +/-60.

    The processed signal is projected onto the clean reference: the target
    is the clean signal scaled by <processed, clean> / <clean, clean>, and
    whatever of the processed signal remains is the distortion.

    Raises:
        DegenerateSignalError: Either signal is all zeros.
    """
    clean, processed = _pair(clean, processed)
    ref_energy = float(np.dot(clean, clean))
    if ref_energy <= 0.0 or not np.any(processed):
        raise DegenerateSignalError("SI-SDR is undefined for an all-zero signal")
    alpha = float(np.dot(processed, clean)) / ref_energy
    target = alpha * clean
    distortion = processed - target
    t_energy = float(np.dot(target, target))
    d_energy = float(np.dot(distortion, distortion))
    if d_energy <= _EPS * max(t_energy, _EPS):
        return SI_SDR_CAP_DB
    if t_energy <= 0.0:
        return -SI_SDR_CAP_DB
    value = 10.0 * np.log10(t_energy / d_energy)
    return float(np.clip(value, -SI_SDR_CAP_DB, SI_SDR_CAP_DB))


def seg_snr(clean: np.ndarray, processed: np.ndarray, frame: int = SEG_SNR_FRAME) -> float:
    """Segmental SNR in dB.

    Non-overlapping frames; each frame's SNR is clamped to [-10, 35] dB and
    frames where the clean signal is silent are skipped.

    Raises:
        DegenerateSignalError: Clean signal has no energy in any frame.
    """
    clean, processed = _pair(clean, processed)
    n = clean.shape[0] // frame
    if n == 0:
        raise InvalidInputError(f"segmental SNR needs at least {frame} samples")
    c = clean[: n * frame].reshape(n, frame)
    e = (clean - processed)[: n * frame].reshape(n, frame)
    sig = np.sum(c * c, axis=1)
    err = np.sum(e * e, axis=1)
    active = sig > _EPS
    if not np.any(active):
        raise DegenerateSignalError("clean signal is silent")
    lo, hi = SEG_SNR_RANGE_DB
    with np.errstate(divide="ignore"):
        ratio = 10.0 * np.log10(sig[active] / np.maximum(err[active], _EPS * _EPS))
    return float(np.mean(np.clip(ratio, lo, hi)))


__all__ = [
    "stoi",
    "estoi",
    "si_sdr",
    "seg_snr",
    "SI_SDR_CAP_DB",
    "SEG_SNR_RANGE_DB",
    "MIN_STOI_SAMPLES",
]
