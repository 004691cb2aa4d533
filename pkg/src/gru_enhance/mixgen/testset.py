"""Pre-mixed test sets on disk.

Layout::

    out_dir/case_000000/mic.wav
                        clean.wav
                        noise.wav
                        farend.wav   (AEC only)
                        echo.wav     (AEC only)
                        meta.txt

Components are quantized to PCM16 individually and the mic is written as
their integer sum, so the mixture identity survives the round trip exactly.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional, Union

import numpy as np

from gru_enhance.errors import CorruptTestsetError, InvalidConfigError
from gru_enhance.mixgen.manifest import ClipStore, CorpusManifest
from gru_enhance.mixgen.mixer import MixtureCase
from gru_enhance.mixgen.sampler import SPLIT_STREAMS, MixSpec, draw_case
from gru_enhance.mixgen.wavio import PCM_SCALE, load_wav, to_pcm16, write_wav

logger = logging.getLogger(__name__)

CASE_DIR_FORMAT = "case_{:06d}"
META_FILE = "meta.txt"
PEAK_LIMIT = 0.9
REQUIRED_META_KEYS = ("snr_db", "esr_db", "delay_samples", "seed", "tag")


def _write_meta(path: Path, values: dict) -> None:
    lines = [f"{key}={'none' if value is None else value}" for key, value in values.items()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_meta(path: Union[str, Path]) -> dict[str, str]:
    """Parse a key=value sidecar."""
    values: dict[str, str] = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise CorruptTestsetError(f"{path}: malformed line {raw!r}")
        values[key.strip()] = value.strip()
    return values


def _quantized_components(case: MixtureCase) -> dict[str, np.ndarray]:
    """Scale all components by one gain so nothing clips, then quantize."""
    parts = {"clean": case.clean, "noise": case.noise}
    if case.is_aec:
        parts["echo"] = case.echo
        parts["farend"] = case.farend
    peak = max(float(np.max(np.abs(x))) for x in [case.mic, *parts.values()])
    gain = min(1.0, PEAK_LIMIT / peak) if peak > 0 else 1.0
    q = {name: to_pcm16(x * gain).astype(np.int32) for name, x in parts.items()}
    mic = q["clean"] + q["noise"] + (q["echo"] if case.is_aec else 0)
    q["mic"] = np.clip(mic, -32768, 32767)
    return q


def _write_case(case_dir: Path, case: MixtureCase, index: int, spec: MixSpec) -> None:
    for name, samples in _quantized_components(case).items():
        write_wav(case_dir / f"{name}.wav", samples / PCM_SCALE)
    _write_meta(
        case_dir / META_FILE,
        {
            "snr_db": f"{case.snr_db:.6f}",
            "esr_db": None if case.esr_db is None else f"{case.esr_db:.6f}",
            "delay_samples": case.delay_samples,
            "seed": spec.seed,
            "tag": case.tag,
            "index": index,
            "task": spec.task,
            **case.meta,
        },
    )


def synth_testset(
    manifest: CorpusManifest,
    spec: MixSpec,
    count: int,
    out_dir: Union[str, Path],
    store: Optional[ClipStore] = None,
    workers: int = 1,
) -> list[Path]:
    """Synthesize and persist count cases from the test split.

    Args:
        manifest: Corpus manifest; only its test split is read.
        spec: Mixing parameters (use DNS_TEST_SNR_RANGE_DB for DNS evaluation).
        count: Number of cases; 0 yields an empty set.
        out_dir: Destination directory.
        store: Clip loader; a fresh one is created when omitted.
        workers: Parallel synthesis threads.

    Returns:
        Case directories in index order.
    """
    if count < 0:
        raise InvalidConfigError(f"count must be >= 0, got {count}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    store = store or ClipStore()
    speech = manifest.paths("speech", "test")
    noise = manifest.paths("noise", "test")

    def build(index: int) -> Path:
        rng = np.random.default_rng([spec.seed, SPLIT_STREAMS["test"], index])
        case = draw_case(spec, speech, noise, store.get, rng)
        case_dir = out_dir / CASE_DIR_FORMAT.format(index)
        _write_case(case_dir, case, index, spec)
        return case_dir

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        dirs = list(pool.map(build, range(count)))
    logger.info("wrote %d %s test cases to %s", count, spec.task, out_dir)
    return dirs


def _optional_float(value: str) -> Optional[float]:
    return None if value.lower() == "none" else float(value)


def load_case(case_dir: Union[str, Path]) -> MixtureCase:
    """Load one persisted case.

    Raises:
        CorruptTestsetError: Missing WAV files or metadata keys.
    """
    case_dir = Path(case_dir)
    meta_path = case_dir / META_FILE
    if not meta_path.exists():
        raise CorruptTestsetError(f"{case_dir} has no {META_FILE}")
    meta = read_meta(meta_path)
    missing = [k for k in REQUIRED_META_KEYS if k not in meta]
    if missing:
        raise CorruptTestsetError(f"{meta_path} is missing keys: {', '.join(missing)}")

    def wav(name: str, required: bool = True) -> Optional[np.ndarray]:
        path = case_dir / f"{name}.wav"
        if not path.exists():
            if required:
                raise CorruptTestsetError(f"{case_dir} is missing {name}.wav")
            return None
        return load_wav(path)

    try:
        esr = _optional_float(meta["esr_db"])
        case = MixtureCase(
            mic=wav("mic"),
            clean=wav("clean"),
            noise=wav("noise"),
            farend=wav("farend", required=False),
            echo=wav("echo", required=False),
            snr_db=float(meta["snr_db"]),
            esr_db=esr,
            delay_samples=int(meta["delay_samples"]),
            seed=int(meta["seed"]),
            tag=meta["tag"],
            meta={k: v for k, v in meta.items() if k not in REQUIRED_META_KEYS},
        )
    except ValueError as e:
        raise CorruptTestsetError(f"{meta_path}: {e}") from e
    if case.farend is not None and case.echo is None:
        case.echo = case.mic - case.clean - case.noise
    case.meta["case_dir"] = str(case_dir)
    return case


def load_testset(directory: Union[str, Path]) -> list[MixtureCase]:
    """Load every case_* directory, in index order."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"Test set directory not found: {directory}")
    return [load_case(d) for d in sorted(directory.glob("case_*")) if d.is_dir()]


__all__ = ["synth_testset", "load_testset", "load_case", "read_meta", "CASE_DIR_FORMAT"]
