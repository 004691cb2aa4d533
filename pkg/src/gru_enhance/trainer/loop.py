"""Online-mixing training loop.

Every batch item is drawn from seed material (seed, split, step, slot), so
the data a step sees does not depend on how worker threads are scheduled
and a resumed run continues exactly where it stopped.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Protocol, Union

import numpy as np

from gru_enhance.dsp.core import DEFAULT_STFT, StftConfig
from gru_enhance.errors import ConfigMismatchError, InvalidConfigError, NumericalAbortError
from gru_enhance.laec.canceller import LaecConfig
from gru_enhance.mixgen.mixer import MAX_DELAY_MS, TRAIN_ESR_RANGE_DB, TRAIN_SNR_RANGE_DB, MixtureCase
from gru_enhance.mixgen.sampler import MixSpec
from gru_enhance.neuralnet.checkpoint import load_checkpoint, save_checkpoint
from gru_enhance.neuralnet.model import ARCH_PRESETS, ArchConfig, ModelParams, backward, forward, init_params
from gru_enhance.objectives.losses import (
    DEFAULT_VAD_THRESHOLD_DB,
    LossConfig,
    LossMode,
    LossReport,
    ProjectionMode,
    TargetSpectrogram,
    VadFrames,
    compute_loss,
    loss_grad_wrt_mask,
    projection_target,
    vad_frames,
)
from gru_enhance.pipeline import CHANNELS_BY_TASK, TrainingItem, check_task, collate, prepare_item
from gru_enhance.trainer.optim import AdamState, adam_step, clip_grad_norm
from gru_enhance.trainer.runlog import RunEvent, RunLog

logger = logging.getLogger(__name__)

FINAL_CHECKPOINT = "final.ckpt"
LAST_GOOD_CHECKPOINT = "last_good.ckpt"


class CaseSampler(Protocol):
    def draw(self, step: int, slot: int = 0) -> MixtureCase: ...


@dataclass(frozen=True)
class TrainConfig:
    """Training run parameters.

    Attributes:
        task: DNS, AEC or AEC_LAEC.
        arch: Network shape; its channel count must match the task.
        loss: Objective.
        projection: Target projection.
        lr: Initial learning rate.
        lr_decay: Multiplicative factor applied once per epoch.
        steps_per_epoch: Steps between learning-rate decays.
        batch: Sequences per step.
        seq_seconds: Sequence length.
        steps: Total optimizer steps.
        seed: Root seed for init and data.
        grad_clip_norm: Global gradient norm limit; 0 disables clipping.
        checkpoint_every: Steps between checkpoints.
        validate_every: Steps between validation passes; 0 validates only at the end.
        val_items: Validation cases per pass.
        workers: Data synthesis threads.
    """

    task: str = "DNS"
    arch: ArchConfig = ARCH_PRESETS["GRU-256"]
    loss: LossMode = LossMode.VAD_INTERPRETED
    projection: ProjectionMode = ProjectionMode.PER_BIN_COMPLEX
    vad_threshold_db: float = DEFAULT_VAD_THRESHOLD_DB
    lr: float = 1e-3
    lr_decay: float = 0.98
    steps_per_epoch: int = 1000
    batch: int = 8
    seq_seconds: float = 10.0
    steps: int = 1000
    seed: int = 0
    grad_clip_norm: float = 5.0
    checkpoint_every: int = 500
    validate_every: int = 500
    val_items: int = 16
    workers: int = 4
    snr_range_db: tuple[float, float] = TRAIN_SNR_RANGE_DB
    esr_range_db: tuple[float, float] = TRAIN_ESR_RANGE_DB
    max_delay_ms: int = MAX_DELAY_MS
    aec_noise_snr_db: Optional[float] = None
    stft: StftConfig = DEFAULT_STFT
    laec: LaecConfig = field(default_factory=LaecConfig)

    def __post_init__(self) -> None:
        check_task(self.task)
        try:
            object.__setattr__(self, "loss", LossMode(self.loss))
            object.__setattr__(self, "projection", ProjectionMode(self.projection))
        except ValueError as e:
            raise InvalidConfigError(str(e)) from e
        if CHANNELS_BY_TASK[self.task] != self.arch.channels:
            raise InvalidConfigError(
                f"task {self.task} needs channels={CHANNELS_BY_TASK[self.task]}, arch has {self.arch.channels}"
            )
        if self.arch.output_bins != self.stft.bins:
            raise InvalidConfigError(
                f"arch output_bins {self.arch.output_bins} != STFT bins {self.stft.bins}"
            )
        for name in ("lr", "seq_seconds"):
            if getattr(self, name) <= 0:
                raise InvalidConfigError(f"{name} must be positive")
        if not 0 < self.lr_decay <= 1:
            raise InvalidConfigError(f"lr_decay must be in (0, 1], got {self.lr_decay}")
        for name in ("batch", "steps_per_epoch", "checkpoint_every", "workers"):
            if getattr(self, name) < 1:
                raise InvalidConfigError(f"{name} must be >= 1")
        if self.steps < 0 or self.val_items < 0 or self.validate_every < 0:
            raise InvalidConfigError("steps, val_items and validate_every must be >= 0")

    @property
    def loss_config(self) -> LossConfig:
        return LossConfig(self.loss, self.projection, self.vad_threshold_db)

    def mix_spec(self) -> MixSpec:
        return MixSpec(
            task="DNS" if self.task == "DNS" else "AEC",
            snr_range_db=self.snr_range_db,
            esr_range_db=self.esr_range_db,
            max_delay_ms=self.max_delay_ms,
            seed=self.seed,
            duration_s=self.seq_seconds,
            aec_noise_snr_db=self.aec_noise_snr_db,
        )

    def lr_at(self, step: int) -> float:
        return self.lr * self.lr_decay ** (step // self.steps_per_epoch)

    def meta(self) -> dict:
        return {
            "task": self.task,
            "loss": LossMode(self.loss).value,
            "projection": ProjectionMode(self.projection).value,
            "vad_threshold_db": self.vad_threshold_db,
            "seed": self.seed,
            "lr": self.lr,
            "lr_decay": self.lr_decay,
            "steps_per_epoch": self.steps_per_epoch,
            "batch": self.batch,
            "seq_seconds": self.seq_seconds,
            "grad_clip_norm": self.grad_clip_norm,
            "stft": {"fft_size": self.stft.fft_size, "hop": self.stft.hop, "window": self.stft.window},
        }


@dataclass
class PreparedItem:
    item: TrainingItem
    target: TargetSpectrogram


@dataclass
class TrainResult:
    params: ModelParams
    adam: AdamState
    step: int
    losses: list[float] = field(default_factory=list)
    val_losses: list[tuple[int, float]] = field(default_factory=list)
    checkpoint: Optional[Path] = None


def prepare(case: MixtureCase, cfg: TrainConfig) -> PreparedItem:
    item = prepare_item(case, cfg.task, cfg.stft, cfg.laec, cfg.vad_threshold_db)
    if cfg.task == "AEC_LAEC" and item.primary_source != "laec":
        raise ConfigMismatchError("AEC_LAEC features must come from the LAEC output")
    return PreparedItem(item, projection_target(item.x, item.c, cfg.projection))


def _item_vad(prepared: PreparedItem, p: np.ndarray, cfg: TrainConfig) -> VadFrames:
    if cfg.loss is LossMode.VAD_LITERAL:
        return vad_frames(prepared.item.x_mag * p, cfg.vad_threshold_db)
    return prepared.item.clean_vad


def batch_loss(
    params: ModelParams,
    batch: list[PreparedItem],
    cfg: TrainConfig,
    with_grad: bool = True,
) -> tuple[LossReport, Optional[ModelParams]]:
    """Mean loss over a batch and, optionally, its parameter gradients."""
    feats, _ = collate([b.item for b in batch])
    mask, cache = forward(params, feats, keep_cache=with_grad)
    mask = np.asarray(mask, dtype=np.float64)
    loss_cfg = cfg.loss_config
    n = len(batch)
    speech = noise = 0.0
    dmask = np.zeros_like(mask) if with_grad else None
    for i, prepared in enumerate(batch):
        frames = prepared.item.frames
        p = mask[i, :frames]
        x_mag = prepared.item.x_mag
        vad = _item_vad(prepared, p, cfg)
        report = compute_loss(prepared.target, x_mag, p, loss_cfg, vad)
        speech += report.speech_term / n
        noise += report.noise_term / n
        if dmask is not None:
            dmask[i, :frames] = loss_grad_wrt_mask(prepared.target, x_mag, p, loss_cfg, vad) / n
    grads = backward(params, cache, dmask) if with_grad else None
    return LossReport(speech, noise), grads


def validate(params: ModelParams, sampler: CaseSampler, cfg: TrainConfig) -> float:
    """Mean validation loss with frozen params."""
    if cfg.val_items == 0:
        return float("nan")
    items = [prepare(sampler.draw(i, 0), cfg) for i in range(cfg.val_items)]
    total = 0.0
    for start in range(0, len(items), cfg.batch):
        chunk = items[start : start + cfg.batch]
        report, _ = batch_loss(params, chunk, cfg, with_grad=False)
        total += report.total * len(chunk)
    return total / len(items)


def _save(
    path: Path, params: ModelParams, adam: AdamState, cfg: TrainConfig, step: int
) -> Path:
    meta = {**cfg.meta(), "step": step, "adam_step": adam.step}
    save_checkpoint(params, params.arch, meta, path, extra=adam.to_tensors() if adam.m else None)
    return path


def resume_state(path: Union[str, Path], cfg: TrainConfig) -> tuple[ModelParams, AdamState, int]:
    """Params, optimizer state and completed step count from a checkpoint.

    Raises:
        ConfigMismatchError: The checkpoint belongs to a different arch or task.
    """
    ckpt = load_checkpoint(path, expected_arch=cfg.arch)
    if ckpt.meta.get("task") not in (None, cfg.task):
        raise ConfigMismatchError(f"checkpoint task {ckpt.meta.get('task')} != {cfg.task}")
    adam = AdamState.from_tensors(int(ckpt.meta.get("adam_step", 0)), ckpt.extra)
    return ckpt.params, adam, int(ckpt.meta.get("step", 0))


def train(
    cfg: TrainConfig,
    sampler: CaseSampler,
    out_dir: Union[str, Path],
    val_sampler: Optional[CaseSampler] = None,
    resume: Optional[Union[str, Path]] = None,
    runlog: Optional[RunLog] = None,
    on_step: Optional[Callable[[int, LossReport], None]] = None,
) -> TrainResult:
    """Train from scratch or resume.

    Args:
        cfg: Run parameters.
        sampler: Training case source, usually an OnlineMixer on the train split.
        out_dir: Checkpoint directory.
        val_sampler: Validation case source (val split).
        resume: Checkpoint to continue from.
        runlog: JSON-lines log; records go nowhere when omitted.
        on_step: Callback after every step (progress display).

    Returns:
        TrainResult with the final params and loss history.

    Raises:
        NumericalAbortError: A loss or gradient became non-finite. The params
            before the failing step are saved as last_good.ckpt.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if resume is not None:
        params, adam, start = resume_state(resume, cfg)
        logger.info("resuming from %s at step %d", resume, start)
        if runlog:
            runlog.record(RunEvent.RESUME, step=start, checkpoint=str(resume))
    else:
        params = init_params(cfg.arch, cfg.seed)
        adam, start = AdamState.zeros(params), 0

    result = TrainResult(params=params, adam=adam, step=start)

    def make_batch(step: int) -> list[PreparedItem]:
        return list(pool.map(lambda slot: prepare(sampler.draw(step, slot), cfg), range(cfg.batch)))

    step = start
    # one thread prefetches the next batch, the pool synthesizes its items
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool, ThreadPoolExecutor(max_workers=1) as prefetch:
        pending: Optional[Future] = None
        try:
            while step < cfg.steps:
                t0 = time.perf_counter()
                batch = pending.result() if pending is not None else make_batch(step)
                pending = prefetch.submit(make_batch, step + 1) if step + 1 < cfg.steps else None

                report, grads = batch_loss(params, batch, cfg)
                assert grads is not None
                grads, norm = clip_grad_norm(grads, cfg.grad_clip_norm)
                if not (np.isfinite(report.total) and np.isfinite(norm)):
                    _save(out_dir / LAST_GOOD_CHECKPOINT, params, adam, cfg, step)
                    if runlog:
                        runlog.record(RunEvent.ABORT, step=step, loss=report.as_dict(), grad_norm=norm)
                    logger.error("non-finite loss at step %d: %s", step, report.as_dict())
                    raise NumericalAbortError(
                        f"non-finite loss at step {step}",
                        details=f"last good checkpoint: {out_dir / LAST_GOOD_CHECKPOINT}",
                    )

                lr = cfg.lr_at(step)
                params, adam = adam_step(params, grads, adam, lr)
                step += 1
                result.losses.append(report.total)
                if runlog:
                    runlog.step(step, report.as_dict(), norm, lr, time.perf_counter() - t0)
                if on_step:
                    on_step(step, report)

                if step % cfg.checkpoint_every == 0 and step < cfg.steps:
                    path = _save(out_dir / f"checkpoint-{step:06d}.ckpt", params, adam, cfg, step)
                    if runlog:
                        runlog.record(RunEvent.CHECKPOINT, step=step, path=str(path))
                if val_sampler and cfg.validate_every and step % cfg.validate_every == 0 and step < cfg.steps:
                    val = validate(params, val_sampler, cfg)
                    result.val_losses.append((step, val))
                    if runlog:
                        runlog.record(RunEvent.VALIDATION, step=step, val_loss=val)
        except KeyboardInterrupt:
            if pending is not None:
                pending.cancel()
            path = _save(out_dir / f"checkpoint-{step:06d}.ckpt", params, adam, cfg, step)
            logger.warning("interrupted at step %d, saved %s", step, path)
            if runlog:
                runlog.record(RunEvent.INTERRUPT, step=step, path=str(path))
            raise

    if val_sampler:
        val = validate(params, val_sampler, cfg)
        result.val_losses.append((step, val))
        if runlog:
            runlog.record(RunEvent.VALIDATION, step=step, val_loss=val)

    final = _save(out_dir / FINAL_CHECKPOINT, params, adam, cfg, step)
    if runlog:
        runlog.record(RunEvent.DONE, step=step, path=str(final))
    result.params, result.adam, result.step, result.checkpoint = params, adam, step, final
    return result


__all__ = [
    "TrainConfig",
    "TrainResult",
    "CaseSampler",
    "PreparedItem",
    "prepare",
    "batch_loss",
    "validate",
    "resume_state",
    "train",
]
