"""Seeded random sampling of mixture cases from a corpus split.

A case is a pure function of (seed stream, manifest, MixSpec): the random
generator is built from integer seed material so that workers can draw
cases in any order and still reproduce the same data.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from gru_enhance.dsp.core import SAMPLE_RATE
from gru_enhance.errors import DegenerateSignalError, InvalidConfigError, InvalidDelayError
from gru_enhance.mixgen.manifest import ClipStore, CorpusManifest
from gru_enhance.mixgen.mixer import (
    MAX_DELAY_MS,
    TRAIN_ESR_RANGE_DB,
    TRAIN_SNR_RANGE_DB,
    MixtureCase,
    fit_length,
    mix_aec,
    mix_dns,
    snr_tag,
)

logger = logging.getLogger(__name__)

TASKS = ("DNS", "AEC")
MAX_DRAW_ATTEMPTS = 8

# Seed stream per split, so train/val/test draws never share generator state.
SPLIT_STREAMS = {"train": 0, "val": 1, "test": 2}


@dataclass(frozen=True)
class MixSpec:
    """How to synthesize one family of mixtures.

    Attributes:
        task: "DNS" (speech + noise) or "AEC" (speech + noise + echo).
        snr_range_db: Uniform SNR range, clean over noise.
        esr_range_db: Uniform ESR range, echo over clean (AEC only).
        max_delay_ms: Upper bound of the uniform echo delay.
        seed: Root seed.
        duration_s: Case length.
        aec_noise_snr_db: Fixed noise SNR for AEC cases; None draws it from snr_range_db.
    """

    task: str = "DNS"
    snr_range_db: tuple[float, float] = TRAIN_SNR_RANGE_DB
    esr_range_db: tuple[float, float] = TRAIN_ESR_RANGE_DB
    max_delay_ms: int = MAX_DELAY_MS
    seed: int = 0
    duration_s: float = 10.0
    aec_noise_snr_db: Optional[float] = None

    def __post_init__(self) -> None:
        if self.task not in TASKS:
            raise InvalidConfigError(f"task must be one of {TASKS}, got {self.task!r}")
        for name in ("snr_range_db", "esr_range_db"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise InvalidConfigError(f"{name} is empty: [{lo}, {hi}]")
        if not 0 <= self.max_delay_ms <= MAX_DELAY_MS:
            raise InvalidDelayError(f"max_delay_ms must be in [0, {MAX_DELAY_MS}], got {self.max_delay_ms}")
        if self.duration_s <= 0:
            raise InvalidConfigError(f"duration_s must be positive, got {self.duration_s}")

    @property
    def num_samples(self) -> int:
        return int(round(self.duration_s * SAMPLE_RATE))

    @property
    def max_delay_samples(self) -> int:
        return self.max_delay_ms * SAMPLE_RATE // 1000


def draw_case(
    spec: MixSpec,
    speech_paths: Sequence[str],
    noise_paths: Sequence[str],
    fetch: Callable[[str], np.ndarray],
    rng: np.random.Generator,
) -> MixtureCase:
    """Draw one mixture from the given file pools.

    Silent crops are redrawn with the same generator, up to a fixed number
    of attempts.

    Raises:
        DegenerateSignalError: If every attempt produced a silent component.
    """
    if not speech_paths or not noise_paths:
        raise InvalidConfigError("cannot draw a case from an empty file pool")
    n = spec.num_samples
    last_error: Optional[DegenerateSignalError] = None
    for _ in range(MAX_DRAW_ATTEMPTS):
        clean_idx = int(rng.integers(len(speech_paths)))
        noise_idx = int(rng.integers(len(noise_paths)))
        snr = float(rng.uniform(*spec.snr_range_db))
        clean = fit_length(fetch(speech_paths[clean_idx]), n, rng)
        noise = fit_length(fetch(noise_paths[noise_idx]), n, rng)
        meta = {"clean_file": speech_paths[clean_idx], "noise_file": noise_paths[noise_idx]}
        try:
            if spec.task == "DNS":
                case = mix_dns(clean, noise, snr)
            else:
                # target and reference are two different talkers when the pool allows it
                far_idx = int(rng.integers(len(speech_paths) - 1)) if len(speech_paths) > 1 else 0
                if len(speech_paths) > 1 and far_idx >= clean_idx:
                    far_idx += 1
                farend = fit_length(fetch(speech_paths[far_idx]), n, rng)
                esr = float(rng.uniform(*spec.esr_range_db))
                delay = int(rng.integers(0, spec.max_delay_samples + 1))
                if spec.aec_noise_snr_db is not None:
                    snr = float(spec.aec_noise_snr_db)
                case = mix_aec(clean, noise, farend, esr, snr, delay)
                meta["farend_file"] = speech_paths[far_idx]
        except DegenerateSignalError as e:
            logger.debug("redrawing silent case: %s", e)
            last_error = e
            continue
        case.tag = snr_tag(case.snr_db)
        case.meta.update(meta)
        return case
    assert last_error is not None
    raise last_error


class OnlineMixer:
    """Draws training or validation cases on demand.

    Only the configured split is ever read; the test split is off limits
    here and is only materialized by synth_testset.
    """

    def __init__(
        self,
        manifest: CorpusManifest,
        spec: MixSpec,
        store: Optional[ClipStore] = None,
        split: str = "train",
    ):
        if split not in ("train", "val"):
            raise InvalidConfigError(f"online mixing reads the train or val split, not {split!r}")
        self.manifest = manifest
        self.spec = spec
        self.store = store or ClipStore()
        self.split = split
        self._speech = manifest.paths("speech", split)
        self._noise = manifest.paths("noise", split)

    def draw(self, step: int, slot: int = 0) -> MixtureCase:
        """Case for (step, slot); identical across calls and processes."""
        rng = np.random.default_rng([self.spec.seed, SPLIT_STREAMS[self.split], step, slot])
        case = draw_case(self.spec, self._speech, self._noise, self.store.get, rng)
        case.seed = self.spec.seed
        case.meta.update({"split": self.split, "step": step, "slot": slot})
        return case


__all__ = ["MixSpec", "OnlineMixer", "draw_case", "SPLIT_STREAMS", "TASKS"]
