"""Linear acoustic echo cancellation.

Partitioned-block frequency-domain NLMS with overlap-save filtering and a
constrained gradient. The far-end reference is first shifted by a
cross-correlation delay estimate, then an adaptive filter covering at least
560 ms predicts the echo, which is subtracted from the microphone signal.

Adaptation slows down during double talk. A divergence guard compares output
and microphone power over each block and every trailing 100 ms window ending
in it; above 4x the block falls back to the microphone signal and the filter
restarts from zero. A final pass then passes the microphone through over any
100 ms window still above the bound, so the bound holds on every window.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.signal import correlate, correlation_lags

from gru_enhance.dsp.core import SAMPLE_RATE
from gru_enhance.errors import DegenerateSignalError, InvalidConfigError, InvalidInputError

logger = logging.getLogger(__name__)

MIN_COVERAGE_MS = 560.0
MIN_DELAY_SIGNAL_S = 1.0
CONFIDENCE_NCC = 0.1
SILENCE_RMS = 1e-8
FAREND_ACTIVE_DB = -40.0
GUARD_WINDOW_MS = 100.0


@dataclass(frozen=True)
class LaecConfig:
    """Adaptive filter parameters.

    Attributes:
        filter_taps_per_block: Partition length, also the processing block size.
        blocks: Number of partitions.
        step_size: NLMS step in (0, 2).
        regularization: Normalizer floor relative to the mean per-bin power.
        delay_search_ms: Largest lag examined by the delay estimator.
        double_talk_ratio: Residual over prediction power above which the step is halved.
        divergence_ratio: Output over mic power (per block or trailing 100 ms window)
            above which a block is passed through and the filter reset.
        align_margin_samples: Samples of causal slack left after delay pre-alignment.
        prealign: Shift the reference by the estimated delay before filtering.
    """

    filter_taps_per_block: int = 256
    blocks: int = 36
    step_size: float = 0.5
    regularization: float = 1e-6
    delay_search_ms: float = 500.0
    double_talk_ratio: float = 2.0
    divergence_ratio: float = 4.0
    align_margin_samples: int = 64
    prealign: bool = True

    def __post_init__(self) -> None:
        if self.filter_taps_per_block <= 0 or self.blocks <= 0:
            raise InvalidConfigError("filter_taps_per_block and blocks must be positive")
        if self.coverage_ms < MIN_COVERAGE_MS:
            raise InvalidConfigError(
                f"filter covers {self.coverage_ms:.1f} ms, need at least {MIN_COVERAGE_MS:.0f} ms",
                suggestion="Increase blocks or filter_taps_per_block.",
            )
        if not 0.0 < self.step_size < 2.0:
            raise InvalidConfigError(f"step_size must be in (0, 2), got {self.step_size}")
        if self.regularization <= 0:
            raise InvalidConfigError(f"regularization must be positive, got {self.regularization}")
        if self.delay_search_ms < 0:
            raise InvalidConfigError(f"delay_search_ms must be >= 0, got {self.delay_search_ms}")

    @property
    def coverage_ms(self) -> float:
        return 1000.0 * self.filter_taps_per_block * self.blocks / SAMPLE_RATE


@dataclass(frozen=True)
class DelayEstimate:
    """Result of the cross-correlation delay search."""

    samples: int
    peak_ncc: float
    confident: bool

    def __int__(self) -> int:
        return self.samples


@dataclass
class LaecResult:
    """Echo-reduced microphone signal.

    Attributes:
        out: mic - echo_estimate, sample for sample.
        echo_estimate: Predicted echo.
        estimated_delay_samples: Delay used for pre-alignment.
        erle_db: ERLE over blocks with active far end and no detected double talk;
            NaN when there are none.
        delay: Full delay estimate, None when the far end is silent.
        guard_trips: Blocks passed through (and filter resets) during adaptation.
        guard_mask: Samples where out is the microphone signal because of the guard.
        echo_dominant_mask: Samples with active far end and no detected double talk.
    """

    out: np.ndarray
    echo_estimate: np.ndarray
    estimated_delay_samples: int
    erle_db: float
    delay: DelayEstimate | None = None
    guard_trips: int = 0
    echo_dominant_mask: np.ndarray | None = None
    guard_mask: np.ndarray | None = None


def _rms(x: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.square(x)))) if x.size else 0.0


def _pad_to(x: np.ndarray, n: int) -> np.ndarray:
    return np.pad(x, (0, n - x.size)) if x.size < n else x


def estimate_delay(mic: np.ndarray, farend: np.ndarray, max_ms: float = 500.0) -> DelayEstimate:
    """Find the lag of the far-end signal inside the microphone signal.

    Args:
        mic: Microphone signal.
        farend: Far-end reference.
        max_ms: Largest lag searched.

    Returns:
        The lag in [0, max_ms] maximizing the normalized cross-correlation
        mic[n] ~ farend[n - lag], its NCC, and whether NCC >= 0.1.

    Raises:
        InvalidInputError: If either signal is shorter than 1 s.
        DegenerateSignalError: If the far end is silent.
    """
    mic = np.asarray(mic, dtype=np.float64)
    farend = np.asarray(farend, dtype=np.float64)
    min_len = int(MIN_DELAY_SIGNAL_S * SAMPLE_RATE)
    if mic.size < min_len or farend.size < min_len:
        raise InvalidInputError(
            f"delay estimation needs at least {MIN_DELAY_SIGNAL_S:g} s of both signals"
        )
    if _rms(farend) <= SILENCE_RMS:
        raise DegenerateSignalError("far-end reference is silent")

    n = max(mic.size, farend.size)
    mic = _pad_to(mic, n)
    farend = _pad_to(farend, n)
    max_lag = min(int(max_ms * SAMPLE_RATE / 1000), n - 1)

    corr = correlate(mic, farend, mode="full", method="fft")
    lags = correlation_lags(n, n, mode="full")
    keep = (lags >= 0) & (lags <= max_lag)
    corr, lags = corr[keep], lags[keep]

    # overlap energies: mic[lag:] against farend[:n - lag]
    mic_tail = np.cumsum(np.square(mic)[::-1])[::-1]
    far_head = np.cumsum(np.square(farend))
    energy = mic_tail[lags] * far_head[n - 1 - lags]
    ncc = np.divide(corr, np.sqrt(energy), out=np.zeros_like(corr), where=energy > 0)

    best = int(np.argmax(ncc))
    peak = float(ncc[best])
    estimate = DelayEstimate(samples=int(lags[best]), peak_ncc=peak, confident=peak >= CONFIDENCE_NCC)
    if not estimate.confident:
        logger.info("low-confidence delay estimate %d samples (NCC %.3f)", estimate.samples, peak)
    return estimate


class PartitionedBlockNlms:
    """Overlap-save partitioned-block NLMS filter.

    One instance owns the adaptive state of one stream. Feed equal-sized
    blocks of reference and microphone through filt, then call update.
    """

    def __init__(self, cfg: LaecConfig):
        self.cfg = cfg
        m = cfg.filter_taps_per_block
        self.M = m
        self.N = cfg.blocks
        self.x = np.zeros(2 * m)
        self.X = np.zeros((self.N, m + 1), dtype=complex)
        self.H = np.zeros((self.N, m + 1), dtype=complex)
        self.E = np.zeros(m + 1, dtype=complex)
        self.mu = cfg.step_size
        self.double_talk = False

    def filt(self, x: np.ndarray, d: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Filter one block. Returns (error, echo prediction)."""
        m = self.M
        self.x = np.concatenate([self.x[m:], x])
        self.X[1:] = self.X[:-1]
        self.X[0] = np.fft.rfft(self.x)
        y = np.fft.irfft(np.sum(self.H * self.X, axis=0), n=2 * m)[m:]
        e = d - y
        self.E = np.fft.rfft(np.concatenate([np.zeros(m), e]))

        pred_power = float(np.dot(y, y))
        res_power = float(np.dot(e, e))
        self.double_talk = pred_power > 0 and res_power > self.cfg.double_talk_ratio * pred_power
        self.mu = self.cfg.step_size * (0.5 if self.double_talk else 1.0)
        return e, y

    def update(self) -> None:
        """Constrained NLMS step from the last filtered block."""
        m = self.M
        # halved: each |X_k|^2 over a 2M frame carries twice the per-tap energy
        power = np.sum(np.abs(self.X) ** 2, axis=0) / 2.0
        if not np.any(power > 0):
            return
        power = power + self.cfg.regularization * float(np.mean(power)) + 1e-12
        grad = np.fft.irfft(np.conj(self.X) * self.E / power, n=2 * m, axis=-1)
        grad[:, m:] = 0.0
        self.H += self.mu * np.fft.rfft(grad, axis=-1)

    def reset(self) -> None:
        """Zero the filter weights; the reference history is kept."""
        self.H[:] = 0.0
        self.E[:] = 0.0
        self.double_talk = False
        self.mu = self.cfg.step_size


def _shift(x: np.ndarray, k: int) -> np.ndarray:
    if k <= 0:
        return x
    return np.concatenate([np.zeros(k), x[:-k]]) if k < x.size else np.zeros_like(x)


def _trailing_energy(x: np.ndarray, count: int, width: int) -> np.ndarray:
    """Energy of the width-sample windows ending at each of the last count samples of x.

    Windows reaching past the start of x are truncated.
    """
    cs = np.concatenate([[0.0], np.cumsum(np.square(x))])
    ends = np.arange(x.size - count + 1, x.size + 1)
    return cs[ends] - cs[np.maximum(ends - width, 0)]


def _guard_tripped(
    e_b: np.ndarray,
    d_b: np.ndarray,
    out_hist: np.ndarray,
    mic_hist: np.ndarray,
    ratio: float,
    width: int,
) -> bool:
    """Whether a tentative output block breaks the output-to-mic power bound.

    Checks the block itself and every width-sample window ending inside it;
    out_hist and mic_hist hold the width - 1 samples preceding the block.
    """
    if np.dot(e_b, e_b) > ratio * np.dot(d_b, d_b):
        return True
    w_out = _trailing_energy(np.concatenate([out_hist, e_b]), e_b.size, width)
    w_mic = _trailing_energy(np.concatenate([mic_hist, d_b]), e_b.size, width)
    return bool(np.any(w_out > ratio * w_mic))


def enforce_power_bound(
    out: np.ndarray, echo: np.ndarray, mic: np.ndarray, ratio: float, width: int
) -> np.ndarray:
    """Replace out by mic over every width-sample window where out exceeds ratio x mic energy.

    Works in place on out and echo and repeats until no window is above the
    bound. Each round only grows the passed-through set, and a window that is
    passed through entirely has ratio 1, so the loop ends.

    Returns:
        Mask of the samples that were passed through.
    """
    passed = np.zeros(out.size, dtype=bool)
    width = min(width, out.size)
    if width == 0:
        return passed
    while True:
        w_out = _trailing_energy(out, out.size - width + 1, width)
        w_mic = _trailing_energy(mic, mic.size - width + 1, width)
        starts = np.flatnonzero(w_out > ratio * w_mic)
        if starts.size == 0:
            return passed
        cover = np.zeros(out.size + 1, dtype=np.int64)
        np.add.at(cover, starts, 1)
        np.add.at(cover, starts + width, -1)
        fresh = (np.cumsum(cover[:-1]) > 0) & ~passed
        if not fresh.any():
            return passed
        out[fresh] = mic[fresh]
        echo[fresh] = 0.0
        passed |= fresh


def cancel(mic: np.ndarray, farend: np.ndarray, cfg: LaecConfig | None = None) -> LaecResult:
    """Subtract the predicted far-end echo from the microphone signal.

    Args:
        mic: Microphone signal.
        farend: Undelayed far-end reference; the shorter input is zero-padded.
        cfg: Filter parameters.

    Returns:
        LaecResult with out == mic - echo_estimate.
    """
    cfg = cfg or LaecConfig()
    mic = np.asarray(mic, dtype=np.float64)
    farend = np.asarray(farend, dtype=np.float64)
    if mic.ndim != 1 or farend.ndim != 1:
        raise InvalidInputError("mic and farend must be one-dimensional")
    n = max(mic.size, farend.size)
    mic_p = _pad_to(mic, n)
    farend = _pad_to(farend, n)

    if not np.any(farend):
        return LaecResult(
            out=mic_p.copy(),
            echo_estimate=np.zeros(n),
            estimated_delay_samples=0,
            erle_db=float("nan"),
        )

    delay: DelayEstimate | None = None
    shift = 0
    if cfg.prealign and n >= MIN_DELAY_SIGNAL_S * SAMPLE_RATE and _rms(farend) > SILENCE_RMS:
        delay = estimate_delay(mic_p, farend, cfg.delay_search_ms)
        if delay.confident:
            shift = max(0, delay.samples - cfg.align_margin_samples)
    ref = _shift(farend, shift)

    m = cfg.filter_taps_per_block
    n_blocks = -(-n // m)
    total = n_blocks * m
    ref = _pad_to(ref, total)
    d_all = _pad_to(mic_p, total)
    out = np.zeros(total)
    echo = np.zeros(total)

    threshold = float(np.max([np.dot(b, b) for b in ref.reshape(n_blocks, m)]))
    threshold *= 10.0 ** (FAREND_ACTIVE_DB / 10.0)
    dominant = np.zeros(total, dtype=bool)

    window = int(GUARD_WINDOW_MS * SAMPLE_RATE / 1000)
    nlms = PartitionedBlockNlms(cfg)
    trips = 0
    tripped = np.zeros(total, dtype=bool)
    for b in range(n_blocks):
        start = b * m
        sl = slice(start, start + m)
        x_b, d_b = ref[sl], d_all[sl]
        e_b, y_b = nlms.filt(x_b, d_b)
        hist = slice(max(0, start - window + 1), start)
        if _guard_tripped(e_b, d_b, out[hist], d_all[hist], cfg.divergence_ratio, window):
            logger.debug("LAEC divergence guard tripped at block %d; filter reset", b)
            out[sl], echo[sl] = d_b, 0.0
            tripped[sl] = True
            nlms.reset()
            trips += 1
            continue
        out[sl], echo[sl] = e_b, y_b
        dominant[sl] = np.dot(x_b, x_b) > threshold and not nlms.double_talk
        nlms.update()

    if trips:
        logger.info("LAEC divergence guard passed %d of %d blocks through and reset the filter", trips, n_blocks)

    out, echo, dominant = out[:n], echo[:n], dominant[:n]
    passed = enforce_power_bound(out, echo, mic_p, cfg.divergence_ratio, window)
    if passed.any():
        logger.info("LAEC power bound passed %d samples through", int(passed.sum()))
    try:
        erle_db = erle(mic_p, out, dominant)
    except DegenerateSignalError:
        erle_db = float("nan")
    return LaecResult(
        out=out,
        echo_estimate=echo,
        estimated_delay_samples=shift if delay is None else delay.samples,
        erle_db=erle_db,
        delay=delay,
        guard_trips=trips,
        echo_dominant_mask=dominant,
        guard_mask=tripped[:n] | passed,
    )


def erle(mic: np.ndarray, out: np.ndarray, echo_only_mask: np.ndarray) -> float:
    """Echo return loss enhancement in dB over masked samples.

    Raises:
        DegenerateSignalError: If the mask selects nothing or the masked mic is silent.
    """
    mask = np.asarray(echo_only_mask, dtype=bool)
    mic = np.asarray(mic, dtype=np.float64)
    out = np.asarray(out, dtype=np.float64)
    if mask.shape != mic.shape or out.shape != mic.shape:
        raise InvalidInputError(
            f"mic {mic.shape}, out {out.shape} and mask {mask.shape} must have equal shapes"
        )
    if not mask.any():
        raise DegenerateSignalError("ERLE mask selects no samples")
    p_mic = float(np.mean(np.square(mic[mask])))
    p_out = float(np.mean(np.square(out[mask])))
    if p_mic == 0.0:
        raise DegenerateSignalError("microphone is silent over the ERLE mask")
    if p_out == 0.0:
        return float("inf")
    return float(10.0 * np.log10(p_mic / p_out))


__all__ = [
    "LaecConfig",
    "LaecResult",
    "DelayEstimate",
    "PartitionedBlockNlms",
    "enforce_power_bound",
    "estimate_delay",
    "cancel",
    "erle",
]
