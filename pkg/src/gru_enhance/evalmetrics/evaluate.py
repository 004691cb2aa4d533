"""Score a persisted test set under one processing condition.

Conditions:
    passthrough  the microphone signal itself (the "noisy" baseline row)
    laec_only    the linear canceller output (AEC test sets)
    model        the full pipeline of a trained checkpoint, iSTFT included
    oracle       the projected-target mask applied to the masking channel
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np

from gru_enhance.dsp.core import DEFAULT_STFT, StftConfig, apply_mask, istft, stft
from gru_enhance.errors import DegenerateSignalError, InvalidConfigError, InvalidInputError
from gru_enhance.evalmetrics.metrics import estoi, seg_snr, si_sdr, stoi
from gru_enhance.laec.canceller import LaecConfig, cancel
from gru_enhance.mixgen.mixer import MixtureCase, snr_tag
from gru_enhance.mixgen.testset import load_testset
from gru_enhance.objectives.losses import ProjectionMode, projection_target, target_mask
from gru_enhance.pipeline import check_task, enhance_waveform, load_model

logger = logging.getLogger(__name__)

MODES = ("passthrough", "laec_only", "model", "oracle")
METRICS = ("stoi", "estoi", "si_sdr_db", "seg_snr_db")
GROUPS = ("low", "high", "all")


@dataclass
class CaseMetrics:
    """Scores for one test case."""

    case_id: str
    tag: str
    snr_db: float
    stoi: float
    estoi: float
    si_sdr_db: float
    seg_snr_db: float

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class MetricReport:
    """Per-case metrics for one condition plus Low/High/overall means.

    Low covers cases below 0 dB SNR, High the rest.
    """

    condition: str
    cases: list[CaseMetrics] = field(default_factory=list)
    label: str = ""

    @property
    def name(self) -> str:
        return self.label or self.condition

    def group(self, tag: str) -> list[CaseMetrics]:
        if tag == "all":
            return list(self.cases)
        return [c for c in self.cases if c.tag == tag]

    def mean(self, metric: str, tag: str = "all") -> float:
        """Arithmetic mean of one metric over a tag group; NaN if the group is empty."""
        if metric not in METRICS:
            raise KeyError(metric)
        values = [getattr(c, metric) for c in self.group(tag)]
        values = [v for v in values if not math.isnan(v)]
        return float(np.mean(values)) if values else float("nan")

    def aggregates(self) -> dict[str, dict[str, float]]:
        return {tag: {m: self.mean(m, tag) for m in METRICS} for tag in GROUPS}


def _oracle(
    case: MixtureCase,
    task: str,
    stft_cfg: StftConfig,
    laec_cfg: Optional[LaecConfig],
    projection: ProjectionMode,
) -> np.ndarray:
    primary = case.mic
    if task == "AEC_LAEC":
        if case.farend is None:
            raise InvalidInputError("AEC_LAEC oracle needs AEC test cases")
        primary = cancel(case.mic, case.farend, laec_cfg).out[: case.mic.shape[0]]
    x = stft(primary, stft_cfg)
    c = stft(case.clean, stft_cfg)
    mask = target_mask(projection_target(x, c, projection), np.abs(x), strict=False)
    return istft(apply_mask(x, mask), stft_cfg, length=case.mic.shape[0])


def _score(case_id: str, case: MixtureCase, processed: np.ndarray) -> CaseMetrics:
    clean = case.clean
    try:
        sdr = si_sdr(clean, processed)
    except DegenerateSignalError:
        sdr = -60.0 if np.any(clean) else float("nan")
    try:
        seg = seg_snr(clean, processed)
    except DegenerateSignalError:
        seg = float("nan")
    return CaseMetrics(
        case_id=case_id,
        tag=case.tag or snr_tag(case.snr_db),
        snr_db=case.snr_db,
        stoi=stoi(clean, processed),
        estoi=estoi(clean, processed),
        si_sdr_db=sdr,
        seg_snr_db=seg,
    )


def evaluate(
    testset_dir: Union[str, Path],
    mode: str = "passthrough",
    checkpoint: Optional[Union[str, Path]] = None,
    task: Optional[str] = None,
    stft_cfg: StftConfig = DEFAULT_STFT,
    laec_cfg: Optional[LaecConfig] = None,
    projection: ProjectionMode | str = ProjectionMode.PER_BIN_COMPLEX,
    workers: int = 4,
    label: str = "",
    on_case: Optional[Callable[[CaseMetrics], None]] = None,
) -> MetricReport:
    """Evaluate a test set under one condition.

    Args:
        testset_dir: Directory written by synth_testset.
        mode: One of passthrough, laec_only, model, oracle.
        checkpoint: Model checkpoint (model mode only).
        task: DNS / AEC / AEC_LAEC; for model mode defaults to the task stored
            in the checkpoint, for oracle mode to DNS.
        stft_cfg: STFT parameters.
        laec_cfg: Canceller parameters.
        projection: Projection used to build the oracle mask.
        workers: Cases scored in parallel.
        label: Row label for reports.
        on_case: Called with each case's metrics as they complete.

    Raises:
        CorruptTestsetError: A case is missing files or metadata.
        InvalidConfigError: Unknown mode or missing checkpoint.
    """
    if mode not in MODES:
        raise InvalidConfigError(f"evaluation mode must be one of {MODES}, got {mode!r}")
    projection = ProjectionMode(projection)
    cases = load_testset(testset_dir)
    if not cases:
        logger.warning("no cases found in %s", testset_dir)

    process: Callable[[MixtureCase], np.ndarray]
    if mode == "passthrough":

        def process(case: MixtureCase) -> np.ndarray:
            return case.mic

    elif mode == "laec_only":

        def process(case: MixtureCase) -> np.ndarray:
            if case.farend is None:
                raise InvalidInputError(f"{case.meta.get('case_dir')}: laec_only needs a far-end signal")
            return cancel(case.mic, case.farend, laec_cfg).out[: case.mic.shape[0]]

    elif mode == "model":
        if checkpoint is None:
            raise InvalidConfigError("model evaluation needs a checkpoint")
        ckpt = load_model(checkpoint, task, stft_cfg)
        run_task = task or ckpt.meta.get("task")

        def process(case: MixtureCase) -> np.ndarray:
            return enhance_waveform(
                ckpt.params, case.mic, case.farend, run_task, stft_cfg, laec_cfg
            ).out

    else:
        oracle_task = check_task(task or "DNS")

        def process(case: MixtureCase) -> np.ndarray:
            return _oracle(case, oracle_task, stft_cfg, laec_cfg, projection)

    def run(case: MixtureCase) -> CaseMetrics:
        case_id = Path(case.meta.get("case_dir", "case")).name
        metrics = _score(case_id, case, process(case))
        if on_case is not None:
            on_case(metrics)
        return metrics

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(run, cases))
    report = MetricReport(condition=mode, cases=results, label=label)
    logger.info(
        "%s: %d cases, mean STOI %.3f, mean ESTOI %.3f",
        report.name,
        len(results),
        report.mean("stoi"),
        report.mean("estoi"),
    )
    return report


__all__ = ["MODES", "METRICS", "CaseMetrics", "MetricReport", "evaluate"]
