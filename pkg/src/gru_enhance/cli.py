"""Command-line interface for gru-enhance.

This module provides the main entry point and argument parsing for the
gru-enhance CLI tool. Every subcommand resolves its configuration from the
defaults, an optional INI file and --set overrides, and writes the resolved
snapshot (resolved.ini) next to its outputs.
"""

from __future__ import annotations

import argparse
import json
import logging
import platform
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from gru_enhance._version import __version__
from gru_enhance.config.settings import (
    arch_config,
    laec_config,
    load_config,
    mix_spec,
    stft_config,
    train_config,
    write_snapshot,
)
from gru_enhance.dsp.core import SAMPLE_RATE
from gru_enhance.display.style import Role, paint, set_color, verdict
from gru_enhance.display.progress import format_count, format_gmacs, format_step, snr_histogram
from gru_enhance.errors import (
    ConfigError,
    ConfigMismatchError,
    ExitCode,
    GruEnhanceError,
    InvalidConfigError,
    format_error_for_user,
    get_exit_code,
)

logger = logging.getLogger("gru_enhance")

MANIFEST_FILE = "manifest.json"
LAEC_STATS_FILE = "laec_stats.json"


def create_parser() -> argparse.ArgumentParser:
    """Create and configure the argument parser.

    Returns:
        Configured ArgumentParser instance.
    """
    parser = argparse.ArgumentParser(
        prog="gru-enhance",
        description="Amplitude-mask GRU speech enhancement, echo cancellation and evaluation",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  gru-enhance info GRU-512                     Parameter count and MAC rate
  gru-enhance synth-data --out testset/dns     Build a DNS test set from the corpus
  gru-enhance --set data.task=AEC synth-data --out testset/aec
  gru-enhance --config run.ini train --out runs/gru256
  gru-enhance train --out runs/gru256 --resume runs/gru256/checkpoint-000500.ckpt
  gru-enhance enhance runs/gru256/final.ckpt noisy.wav --out clean.wav
  gru-enhance aec-run runs/aec/final.ckpt mic.wav --farend ref.wav --out out.wav
  gru-enhance laec mic.wav ref.wav --out laec_out/
  gru-enhance evaluate testset/dns --mode passthrough --mode oracle
  gru-enhance grad-check                       Finite-difference check of all objectives

Configuration:
  Sections [stft] [data] [model] [objectives] [train] [laec] [eval]; see
  configs/default.ini. --set section.key=value overrides win over the file.

Exit codes:
  0 success, 1 usage, 2 config, 3 data, 4 model/pipeline mismatch, 5 numerical abort
""",
    )
    parser.add_argument("--version", "-V", action="store_true", help="Show version information")
    parser.add_argument("--config", "-c", metavar="FILE", help="INI config file")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="Override a config value (repeatable)",
    )
    parser.add_argument("--verbose", "-v", action="store_true", help="Debug logging and full error details")
    parser.add_argument("--quiet", "-q", action="store_true", help="Only print errors")
    parser.add_argument("--no-color", action="store_true", help="Disable colored output")

    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("synth-data", help="Synthesize a persisted test set from the corpus test split")
    p.add_argument("--out", required=True, help="Test-set directory")
    p.add_argument("--count", type=int, help="Number of cases (default: data.test_count)")
    p.add_argument("--speech-dir", help="Speech corpus directory (overrides data.speech_dir)")
    p.add_argument("--noise-dir", help="Noise corpus directory (overrides data.noise_dir)")

    p = sub.add_parser("train", help="Train a model with online mixing")
    p.add_argument("--out", required=True, help="Run directory for checkpoints and logs")
    p.add_argument("--resume", help="Checkpoint to resume from")
    p.add_argument("--speech-dir", help="Speech corpus directory (overrides data.speech_dir)")
    p.add_argument("--noise-dir", help="Noise corpus directory (overrides data.noise_dir)")

    for name, help_text in (
        ("enhance", "Enhance one recording with a trained model"),
        ("aec-run", "Run the full echo-cancellation pipeline on a mic / far-end pair"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("checkpoint", help="Model checkpoint")
        p.add_argument("input", help="Microphone WAV (PCM16 mono 16 kHz)")
        p.add_argument("--farend", help="Far-end reference WAV (two-channel models)")
        p.add_argument("--out", required=True, help="Output WAV")
        p.add_argument("--task", help="DNS, AEC or AEC_LAEC (default: from checkpoint)")
        p.add_argument("--batch", action="store_true", help="Run the network over the whole clip at once")

    p = sub.add_parser("laec", help="Run the linear echo canceller alone")
    p.add_argument("mic", help="Microphone WAV")
    p.add_argument("farend", help="Far-end reference WAV")
    p.add_argument("--out", required=True, help="Output directory (laec.wav + laec_stats.json)")

    p = sub.add_parser("evaluate", help="Score a test set under one or more conditions")
    p.add_argument("testset", help="Directory written by synth-data")
    p.add_argument(
        "--mode",
        action="append",
        dest="modes",
        help="passthrough, laec_only, model or oracle (repeatable; default: eval.mode)",
    )
    p.add_argument("--checkpoint", help="Model checkpoint for --mode model")
    p.add_argument("--task", help="Task for model / oracle modes")
    p.add_argument("--out", help="Report directory (default: TESTSET/eval)")

    p = sub.add_parser("info", help="Parameter count and MAC rate of an architecture")
    p.add_argument("arch", nargs="?", help="GRU-512, GRU-256, GRU-320 or custom (default: all presets)")

    p = sub.add_parser("grad-check", help="Finite-difference check of loss and network gradients")
    p.add_argument("--loss", help="Check one loss mode only")
    p.add_argument("--projection", help="Check one projection mode only")
    p.add_argument("--seed", type=int, default=0, help="Problem seed")

    return parser


def print_version() -> None:
    """Print version and system information."""
    print(
        f"gru-enhance {__version__} "
        f"(Python {sys.version_info.major}.{sys.version_info.minor}.{sys.version_info.micro}, "
        f"{platform.system()} {platform.machine()})"
    )


def _setup_logging(verbose: bool, quiet: bool) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(
        level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr, force=True
    )


def _say(args: argparse.Namespace, text: str = "") -> None:
    if not args.quiet:
        print(text)


# Corpus


def _resolve_manifest(config: dict, args: argparse.Namespace):
    """Manifest from data.manifest, or a fresh split of the corpus directories."""
    from gru_enhance.mixgen.manifest import CorpusManifest, scan_corpus, split_manifest

    data = config["data"]
    if data["manifest"]:
        path = Path(data["manifest"])
        if not path.is_file():
            raise FileNotFoundError(f"Manifest not found: {path}")
        return CorpusManifest.load(path)
    speech_dir = getattr(args, "speech_dir", None) or data["speech_dir"]
    noise_dir = getattr(args, "noise_dir", None) or data["noise_dir"]
    if not speech_dir or not noise_dir:
        raise ConfigError(
            "No corpus configured",
            suggestion="Set data.speech_dir and data.noise_dir, or data.manifest.",
        )
    config["data"]["speech_dir"], config["data"]["noise_dir"] = str(speech_dir), str(noise_dir)
    return split_manifest(scan_corpus(speech_dir), scan_corpus(noise_dir), data["seed"])


# Subcommands


def cmd_synth_data(args: argparse.Namespace, config: dict) -> int:
    from gru_enhance.mixgen.manifest import ClipStore
    from gru_enhance.mixgen.testset import load_testset, synth_testset

    count = args.count if args.count is not None else config["data"]["test_count"]
    config["data"]["test_count"] = count
    manifest = _resolve_manifest(config, args)
    spec = mix_spec(config, test=True)

    out = Path(args.out)
    store = ClipStore(max_clips=config["data"]["clip_cache"])
    dirs = synth_testset(manifest, spec, count, out, store, workers=config["data"]["workers"])
    manifest.save(out / MANIFEST_FILE)
    write_snapshot(config, out)

    cases = load_testset(out)
    _say(args, paint(f"Wrote {len(dirs)} {spec.task} cases to {out}", Role.DONE))
    if cases:
        _say(args, "SNR histogram (dB):")
        for row in snr_histogram([c.snr_db for c in cases]):
            _say(args, f"  {row}")
        low = sum(1 for c in cases if c.tag == "low")
        _say(args, f"  low SNR: {low}  high SNR: {len(cases) - low}")
        if spec.task == "AEC":
            delays = [c.delay_samples for c in cases]
            _say(args, f"  echo delay: {min(delays)}..{max(delays)} samples")
    return ExitCode.SUCCESS


def cmd_train(args: argparse.Namespace, config: dict) -> int:
    from gru_enhance.mixgen.manifest import ClipStore
    from gru_enhance.mixgen.sampler import OnlineMixer
    from gru_enhance.objectives.losses import LossReport
    from gru_enhance.trainer.loop import train
    from gru_enhance.trainer.runlog import RUNLOG_FILE, RunLog

    cfg = train_config(config)
    manifest = _resolve_manifest(config, args)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest.save(out / MANIFEST_FILE)
    write_snapshot(config, out)

    store = ClipStore(max_clips=config["data"]["clip_cache"])
    sampler = OnlineMixer(manifest, cfg.mix_spec(), store, split="train")
    val_sampler = OnlineMixer(manifest, cfg.mix_spec(), store, split="val")

    def on_step(step: int, report: LossReport) -> None:
        if not args.quiet:
            line = format_step(step, cfg.steps, report.total, cfg.lr_at(step - 1))
            print(f"\r{line}", end="", flush=True)

    _say(args, f"Training {cfg.arch.name} ({cfg.task}, {cfg.loss.value}, {cfg.projection.value}) -> {out}")
    try:
        result = train(cfg, sampler, out, val_sampler, args.resume, RunLog(out / RUNLOG_FILE), on_step)
    finally:
        _say(args)
    _say(args, paint(f"Done at step {result.step}; final checkpoint {result.checkpoint}", Role.DONE))
    if result.val_losses:
        _say(args, f"Final validation loss {result.val_losses[-1][1]:.4g}")
    return ExitCode.SUCCESS


def _model_task(ckpt, requested: Optional[str]) -> str:
    if requested:
        return requested
    stored = ckpt.meta.get("task")
    if stored:
        return stored
    return "DNS" if ckpt.arch.channels == 1 else "AEC_LAEC"


def cmd_enhance(args: argparse.Namespace, config: dict) -> int:
    from gru_enhance.mixgen.wavio import load_wav, write_wav
    from gru_enhance.pipeline import enhance_waveform, load_model

    stft_cfg = stft_config(config)
    ckpt = load_model(args.checkpoint, args.task, stft_cfg)
    channels = ckpt.arch.channels
    if args.command == "aec-run" and channels != 2:
        raise ConfigMismatchError("aec-run needs a two-channel (AEC or AEC_LAEC) checkpoint")
    if channels == 2 and not args.farend:
        raise ConfigMismatchError("Checkpoint is two-channel but no --farend was given")
    if channels == 1 and args.farend:
        raise ConfigMismatchError("Checkpoint is single-channel but --farend was given")

    task = _model_task(ckpt, args.task)
    mic = load_wav(args.input)
    farend = load_wav(args.farend) if args.farend else None
    result = enhance_waveform(
        ckpt.params, mic, farend, task, stft_cfg, laec_config(config), streaming=not args.batch
    )

    out = Path(args.out)
    write_wav(out, result.out)
    write_snapshot(config, out.parent)
    if result.laec is not None:
        write_wav(out.with_name(f"{out.stem}.laec.wav"), result.laec.out[: mic.shape[0]])
        (out.parent / LAEC_STATS_FILE).write_text(json.dumps(_laec_stats(result.laec), indent=2))

    _say(args, f"{paint(f'Wrote {out}', Role.DONE)} ({task}, masking channel: {result.primary_source})")
    _say(args, f"Realtime factor: {result.realtime_factor:.3f} ({result.elapsed_s:.2f} s for {mic.shape[0] / SAMPLE_RATE:.2f} s)")
    return ExitCode.SUCCESS


def _laec_stats(result) -> dict:
    delay = result.delay
    return {
        "estimated_delay_samples": int(result.estimated_delay_samples),
        "delay_confident": bool(delay.confident) if delay else False,
        "delay_peak_ncc": float(delay.peak_ncc) if delay else None,
        "erle_db": None if np.isnan(result.erle_db) else float(result.erle_db),
        "guard_trips": int(result.guard_trips),
        "guard_passthrough_samples": 0 if result.guard_mask is None else int(result.guard_mask.sum()),
    }


def cmd_laec(args: argparse.Namespace, config: dict) -> int:
    from gru_enhance.laec.canceller import cancel
    from gru_enhance.mixgen.wavio import load_wav, write_wav

    mic = load_wav(args.mic)
    farend = load_wav(args.farend)
    result = cancel(mic, farend, laec_config(config))

    out = Path(args.out)
    write_wav(out / "laec.wav", result.out[: mic.shape[0]])
    stats = _laec_stats(result)
    (out / LAEC_STATS_FILE).write_text(json.dumps(stats, indent=2))
    write_snapshot(config, out)

    erle = "n/a" if stats["erle_db"] is None else f"{stats['erle_db']:.1f} dB"
    confidence = "" if stats["delay_confident"] else " " + paint("(low confidence)", Role.NOTICE)
    _say(args, paint(f"Wrote {out / 'laec.wav'}", Role.DONE))
    _say(args, f"Estimated delay: {stats['estimated_delay_samples']} samples{confidence}")
    _say(args, f"ERLE: {erle}; divergence guard trips: {stats['guard_trips']}")
    return ExitCode.SUCCESS


def cmd_evaluate(args: argparse.Namespace, config: dict) -> int:
    from gru_enhance.evalmetrics.evaluate import evaluate
    from gru_enhance.evalmetrics.report import export_csv, format_table

    modes = args.modes or [config["eval"]["mode"]]
    out = Path(args.out) if args.out else Path(args.testset) / "eval"
    reports = []
    for mode in modes:
        reports.append(
            evaluate(
                args.testset,
                mode=mode,
                checkpoint=args.checkpoint,
                task=args.task,
                stft_cfg=stft_config(config),
                laec_cfg=laec_config(config),
                projection=config["eval"]["oracle_projection"],
                workers=config["eval"]["workers"],
            )
        )
    out.mkdir(parents=True, exist_ok=True)
    export_csv(reports, out / "metrics.csv")
    write_snapshot(config, out)
    _say(args, format_table(reports, color=True))
    _say(args, f"\nPer-case metrics: {out / 'metrics.csv'}")
    return ExitCode.SUCCESS


def cmd_info(args: argparse.Namespace, config: dict) -> int:
    from gru_enhance.neuralnet.model import ARCH_PRESETS, macs_per_frame, macs_per_second, param_count

    frame_rate = stft_config(config).frame_rate
    if args.arch is None:
        names = list(ARCH_PRESETS)
    else:
        if args.arch not in ARCH_PRESETS and args.arch != "custom":
            raise InvalidConfigError(
                f"Unknown architecture {args.arch!r}",
                suggestion=f"Use one of {', '.join(ARCH_PRESETS)} or custom.",
            )
        names = [args.arch]

    for name in names:
        config["model"]["arch"] = name
        if name in ARCH_PRESETS:
            config["data"]["task"] = "DNS" if ARCH_PRESETS[name].channels == 1 else "AEC_LAEC"
        arch = arch_config(config)
        count = param_count(arch)
        rate = macs_per_second(arch, frame_rate)
        print(f"{paint(arch.name, Role.TITLE)}: {format_count(count)} params, {format_gmacs(rate)} GMAC/s")
        if not args.quiet:
            print(
                f"  {count:,} parameters; {macs_per_frame(arch):,} MACs/frame at {frame_rate:g} frames/s; "
                f"input {arch.input_bins} x {arch.channels} channel(s), hidden {arch.hidden}"
            )
    return ExitCode.SUCCESS


def cmd_grad_check(args: argparse.Namespace, config: dict) -> int:
    from gru_enhance.objectives.losses import LossMode, ProjectionMode
    from gru_enhance.trainer.gradcheck import grad_check

    try:
        losses = [LossMode(args.loss)] if args.loss else list(LossMode)
        projections = [ProjectionMode(args.projection)] if args.projection else list(ProjectionMode)
    except ValueError as e:
        raise InvalidConfigError(str(e)) from e

    failed = 0
    for loss in losses:
        for projection in projections:
            report = grad_check(loss, projection, seed=args.seed)
            print(paint(report.summary(), verdict(report.passed)))
            failed += not report.passed
    if failed:
        print(paint(f"{failed} combination(s) failed", Role.FAILURE), file=sys.stderr)
        return ExitCode.NUMERICAL_ABORT
    return ExitCode.SUCCESS


COMMANDS = {
    "synth-data": cmd_synth_data,
    "train": cmd_train,
    "enhance": cmd_enhance,
    "aec-run": cmd_enhance,
    "laec": cmd_laec,
    "evaluate": cmd_evaluate,
    "info": cmd_info,
    "grad-check": cmd_grad_check,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point for the gru-enhance CLI.

    Returns:
        Process exit code.
    """
    parser = create_parser()
    args = parser.parse_args(argv)

    set_color(False if args.no_color else None)

    if args.version:
        print_version()
        return ExitCode.SUCCESS

    if not args.command:
        parser.print_help()
        return ExitCode.USAGE_ERROR

    _setup_logging(args.verbose, args.quiet)

    try:
        config = load_config(args.config, args.overrides)
        return int(COMMANDS[args.command](args, config))
    except KeyboardInterrupt:
        print("\n" + paint("Interrupted", Role.NOTICE), file=sys.stderr)
        return 130
    except (GruEnhanceError, FileNotFoundError, ValueError, OSError) as e:
        print(paint(format_error_for_user(e, verbose=args.verbose), Role.FAILURE), file=sys.stderr)
        if isinstance(e, GruEnhanceError) and e.get_suggestion() and not args.verbose:
            print(paint(f"Suggestion: {e.get_suggestion()}", Role.NOTICE), file=sys.stderr)
        if args.verbose:
            logger.debug("traceback", exc_info=True)
        return get_exit_code(e)


__all__ = ["main", "create_parser", "COMMANDS"]
