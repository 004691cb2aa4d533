"""Corpus listing, 8:1:1 split management and clip loading.

A manifest is immutable once built. Clip reads go through ClipStore, a
bounded LRU cache that remembers every path it served so tests can prove
which splits a run touched.
"""

from __future__ import annotations

import json
import threading
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from gru_enhance.errors import CorruptFileError, InsufficientCorpusError
from gru_enhance.mixgen.wavio import load_wav, wav_duration

SPLITS = ("train", "val", "test")
CATEGORIES = ("speech", "noise")
MIN_FILES_PER_CATEGORY = 10
CLIP_CACHE_SIZE = 256


@dataclass(frozen=True)
class CorpusEntry:
    """One corpus file."""

    path: str
    duration_s: Optional[float] = None


@dataclass(frozen=True)
class CorpusManifest:
    """Speech and noise files partitioned into train/val/test.

    Attributes:
        speech: split name -> entries.
        noise: split name -> entries.
        seed: Seed the partition was drawn with.
    """

    speech: dict
    noise: dict
    seed: int = 0

    def files(self, category: str, split: str) -> list[CorpusEntry]:
        return list(getattr(self, category)[split])

    def paths(self, category: str, split: str) -> list[str]:
        return [e.path for e in getattr(self, category)[split]]

    def counts(self) -> dict[str, dict[str, int]]:
        return {
            cat: {split: len(getattr(self, cat)[split]) for split in SPLITS} for cat in CATEGORIES
        }

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            **{
                cat: {
                    split: [{"path": e.path, "duration_s": e.duration_s} for e in entries]
                    for split, entries in getattr(self, cat).items()
                }
                for cat in CATEGORIES
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> CorpusManifest:
        try:
            parts = {
                cat: {
                    split: [CorpusEntry(e["path"], e.get("duration_s")) for e in data[cat][split]]
                    for split in SPLITS
                }
                for cat in CATEGORIES
            }
        except (KeyError, TypeError) as e:
            raise CorruptFileError(f"Malformed manifest: missing {e}") from e
        return cls(speech=parts["speech"], noise=parts["noise"], seed=int(data.get("seed", 0)))

    def save(self, path: Union[str, Path]) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2)

    @classmethod
    def load(cls, path: Union[str, Path]) -> CorpusManifest:
        try:
            with open(path, encoding="utf-8") as f:
                return cls.from_dict(json.load(f))
        except json.JSONDecodeError as e:
            raise CorruptFileError(f"Manifest {path} is not valid JSON: {e}") from e


def scan_corpus(directory: Union[str, Path]) -> list[CorpusEntry]:
    """List WAV files under a directory (recursively), sorted, with durations.

    Raises:
        FileNotFoundError: If the directory does not exist.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"Corpus directory not found: {directory}")
    return [CorpusEntry(str(p), wav_duration(p)) for p in sorted(directory.rglob("*.wav"))]


def _as_entries(files: Iterable[Union[CorpusEntry, str, Path]]) -> list[CorpusEntry]:
    entries = [f if isinstance(f, CorpusEntry) else CorpusEntry(str(f)) for f in files]
    return sorted(entries, key=lambda e: e.path)


def split_files(
    files: Sequence[Union[CorpusEntry, str, Path]], rng: np.random.Generator, category: str = "files"
) -> dict[str, list[CorpusEntry]]:
    """Partition one category 8:1:1 by file count."""
    entries = _as_entries(files)
    if len(entries) < MIN_FILES_PER_CATEGORY:
        raise InsufficientCorpusError(
            f"need at least {MIN_FILES_PER_CATEGORY} {category} files, got {len(entries)}"
        )
    if len({e.path for e in entries}) != len(entries):
        raise InsufficientCorpusError(f"duplicate {category} paths in corpus listing")
    n = len(entries)
    n_val = max(1, round(n / 10))
    n_test = max(1, round(n / 10))
    order = rng.permutation(n)
    shuffled = [entries[i] for i in order]
    return {
        "test": shuffled[:n_test],
        "val": shuffled[n_test : n_test + n_val],
        "train": shuffled[n_test + n_val :],
    }


def split_manifest(
    speech_files: Sequence[Union[CorpusEntry, str, Path]],
    noise_files: Sequence[Union[CorpusEntry, str, Path]],
    seed: int,
) -> CorpusManifest:
    """Build a deterministic, disjoint 8:1:1 manifest.

    Raises:
        InsufficientCorpusError: If a category has fewer than 10 files.
    """
    speech = split_files(speech_files, np.random.default_rng([seed, 0]), "speech")
    noise = split_files(noise_files, np.random.default_rng([seed, 1]), "noise")
    return CorpusManifest(speech=speech, noise=noise, seed=seed)


class ClipStore:
    """Thread-safe WAV loader with a least-recently-used clip cache.

    At most max_clips decoded clips are held; 0 disables caching. The set of
    paths ever read grows only with the number of distinct corpus files.
    """

    def __init__(self, loader=load_wav, max_clips: int = CLIP_CACHE_SIZE):
        if max_clips < 0:
            raise ValueError(f"max_clips must be >= 0, got {max_clips}")
        self._loader = loader
        self.max_clips = max_clips
        self._cache: OrderedDict[str, np.ndarray] = OrderedDict()
        self._lock = threading.Lock()
        self._accessed: set[str] = set()
        self.hits = 0
        self.misses = 0

    def get(self, path: str) -> np.ndarray:
        with self._lock:
            self._accessed.add(path)
            cached = self._cache.get(path)
            if cached is not None:
                self._cache.move_to_end(path)
                self.hits += 1
                return cached
            self.misses += 1
        clip = self._loader(path)
        if self.max_clips == 0:
            return clip
        with self._lock:
            clip = self._cache.setdefault(path, clip)
            self._cache.move_to_end(path)
            while len(self._cache) > self.max_clips:
                self._cache.popitem(last=False)
        return clip

    @property
    def cached(self) -> int:
        with self._lock:
            return len(self._cache)

    def accessed(self) -> set[str]:
        with self._lock:
            return set(self._accessed)


__all__ = [
    "SPLITS",
    "CorpusEntry",
    "CorpusManifest",
    "CLIP_CACHE_SIZE",
    "ClipStore",
    "scan_corpus",
    "split_files",
    "split_manifest",
]
