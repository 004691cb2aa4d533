"""Online mixing of noise-suppression and echo-cancellation cases.

Levels are full-clip mean-square powers. SNR is clean over noise, ESR is
echo over clean, both in dB.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.signal import fftconvolve

from gru_enhance.dsp.core import SAMPLE_RATE
from gru_enhance.errors import DegenerateSignalError, InvalidDelayError, InvalidInputError

MAX_DELAY_MS = 500
MAX_DELAY_SAMPLES = MAX_DELAY_MS * SAMPLE_RATE // 1000
SILENCE_RMS = 1e-8

# Training SNR range used for the reported experiments; the alternative
# DNS training range and the DNS test range are kept alongside it.
TRAIN_SNR_RANGE_DB = (-5.0, 10.0)
DNS_TRAIN_SNR_RANGE_ALT_DB = (-5.0, 15.0)
DNS_TEST_SNR_RANGE_DB = (-15.0, 15.0)
TRAIN_ESR_RANGE_DB = (-5.0, 10.0)
LOW_SNR_BOUNDARY_DB = 0.0


@dataclass
class MixtureCase:
    """One synthesized item: microphone mix plus its components.

    Attributes:
        mic: clean + noise (+ echo), sample for sample.
        clean: Near-end target speech.
        noise: Scaled noise as added to the mix.
        farend: Undelayed far-end reference (AEC only).
        echo: Delayed, filtered, scaled far-end as added to the mix (AEC only).
        snr_db: Requested clean-to-noise ratio.
        esr_db: Requested echo-to-clean ratio (AEC only).
        delay_samples: Far-end to echo delay.
        seed: Seed material the case was drawn with, if any.
        tag: "low" / "high" SNR tag for test cases.
    """

    mic: np.ndarray
    clean: np.ndarray
    noise: np.ndarray
    farend: Optional[np.ndarray] = None
    echo: Optional[np.ndarray] = None
    snr_db: float = float("inf")
    esr_db: Optional[float] = None
    delay_samples: int = 0
    seed: Optional[int] = None
    tag: Optional[str] = None
    meta: dict = field(default_factory=dict)

    @property
    def duration_s(self) -> float:
        return self.mic.shape[0] / SAMPLE_RATE

    @property
    def is_aec(self) -> bool:
        return self.farend is not None

    def identity_error(self) -> float:
        """Max abs deviation of mic from the sum of its components."""
        total = self.clean + self.noise
        if self.echo is not None:
            total = total + self.echo
        return float(np.max(np.abs(self.mic - total))) if self.mic.size else 0.0


def mean_power(x: np.ndarray) -> float:
    return float(np.mean(np.square(x, dtype=np.float64)))


def _require_active(x: np.ndarray, name: str) -> float:
    power = mean_power(x)
    if np.sqrt(power) <= SILENCE_RMS:
        raise DegenerateSignalError(f"{name} is silent (RMS <= {SILENCE_RMS:g})")
    return power


def measure_snr(target: np.ndarray, interferer: np.ndarray) -> float:
    """Full-clip power ratio of target over interferer in dB."""
    p_t = _require_active(target, "target")
    p_i = _require_active(interferer, "interferer")
    return float(10.0 * np.log10(p_t / p_i))


def scale_for_snr(target: np.ndarray, interferer: np.ndarray, snr_db: float) -> np.ndarray:
    """Scale interferer so that target-over-interferer power equals snr_db.

    Args:
        target: Reference signal (left unchanged).
        interferer: Signal to rescale.
        snr_db: Requested ratio in dB.

    Returns:
        Rescaled copy of interferer.

    Raises:
        DegenerateSignalError: If either signal is silent.
    """
    p_t = _require_active(target, "target")
    p_i = _require_active(interferer, "interferer")
    gain = np.sqrt(p_t / (p_i * 10.0 ** (snr_db / 10.0)))
    return np.asarray(interferer, dtype=np.float64) * gain


def fit_length(clip: np.ndarray, length: int, rng: np.random.Generator) -> np.ndarray:
    """Loop a short clip or randomly crop a long one to exactly length samples."""
    clip = np.asarray(clip, dtype=np.float64)
    if clip.size == 0:
        raise InvalidInputError("cannot fit an empty clip")
    if clip.size < length:
        reps = -(-length // clip.size)
        return np.tile(clip, reps)[:length]
    start = int(rng.integers(0, clip.size - length + 1))
    return clip[start : start + length].copy()


def _check_equal(clean: np.ndarray, *others: Optional[np.ndarray]) -> None:
    for other in others:
        if other is not None and other.shape != clean.shape:
            raise InvalidInputError(
                f"clips must have equal length: {clean.shape[0]} vs {other.shape[0]}"
            )


def mix_dns(clean: np.ndarray, noise: np.ndarray, snr_db: float) -> MixtureCase:
    """Noise-suppression mixture: mic = clean + noise scaled to snr_db."""
    clean = np.asarray(clean, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    _check_equal(clean, noise)
    scaled = scale_for_snr(clean, noise, snr_db)
    return MixtureCase(mic=clean + scaled, clean=clean, noise=scaled, snr_db=float(snr_db))


def render_echo(
    farend: np.ndarray, delay_samples: int, echo_path: Optional[np.ndarray] = None
) -> np.ndarray:
    """Delay the far-end signal and pass it through the echo path FIR."""
    n = farend.shape[0]
    delayed = np.concatenate([np.zeros(delay_samples), farend])[:n]
    if echo_path is None:
        return delayed
    return fftconvolve(delayed, np.asarray(echo_path, dtype=np.float64))[:n]


def mix_aec(
    clean: np.ndarray,
    noise: Optional[np.ndarray],
    farend: np.ndarray,
    esr_db: float,
    snr_db: float,
    delay_samples: int,
    echo_path: Optional[np.ndarray] = None,
) -> MixtureCase:
    """Echo-cancellation mixture: mic = clean + noise + echo.

    The echo is the far-end delayed by delay_samples, filtered by echo_path
    (pure delay when None) and scaled to esr_db relative to clean. Noise is
    scaled to snr_db relative to clean. A silent far-end contributes no echo,
    and noise=None mixes without noise.

    Raises:
        InvalidDelayError: If delay_samples is outside [0, 8000].
    """
    if not 0 <= delay_samples <= MAX_DELAY_SAMPLES:
        raise InvalidDelayError(
            f"delay {delay_samples} samples outside [0, {MAX_DELAY_SAMPLES}]"
        )
    clean = np.asarray(clean, dtype=np.float64)
    farend = np.asarray(farend, dtype=np.float64)
    _check_equal(clean, noise, farend)

    if noise is None:
        scaled_noise = np.zeros_like(clean)
        snr = float("inf")
    else:
        scaled_noise = scale_for_snr(clean, noise, snr_db)
        snr = float(snr_db)

    echo = render_echo(farend, delay_samples, echo_path)
    if np.sqrt(mean_power(echo)) <= SILENCE_RMS:
        echo = np.zeros_like(clean)
        esr: Optional[float] = None
    else:
        echo = echo * np.sqrt(
            _require_active(clean, "clean") * 10.0 ** (esr_db / 10.0) / mean_power(echo)
        )
        esr = float(esr_db)

    return MixtureCase(
        mic=clean + scaled_noise + echo,
        clean=clean,
        noise=scaled_noise,
        farend=farend,
        echo=echo,
        snr_db=snr,
        esr_db=esr,
        delay_samples=int(delay_samples),
    )


def snr_tag(snr_db: float) -> str:
    """Low / high SNR tag with the boundary at 0 dB."""
    return "low" if snr_db < LOW_SNR_BOUNDARY_DB else "high"


__all__ = [
    "MAX_DELAY_MS",
    "MAX_DELAY_SAMPLES",
    "TRAIN_SNR_RANGE_DB",
    "DNS_TRAIN_SNR_RANGE_ALT_DB",
    "DNS_TEST_SNR_RANGE_DB",
    "TRAIN_ESR_RANGE_DB",
    "MixtureCase",
    "mean_power",
    "measure_snr",
    "scale_for_snr",
    "fit_length",
    "mix_dns",
    "mix_aec",
    "render_echo",
    "snr_tag",
]
