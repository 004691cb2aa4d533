"""
Pytest fixtures for gru-enhance tests.

Test imports use the src/gru_enhance/ package. All audio is synthetic:
harmonic "speech" surrogates with syllable-rate envelopes and pauses, and
colored noise, so no corpus download is needed.
"""

from pathlib import Path

import numpy as np
import pytest
from scipy.signal import lfilter

from gru_enhance.dsp.core import SAMPLE_RATE
from gru_enhance.mixgen.manifest import scan_corpus, split_manifest
from gru_enhance.mixgen.mixer import MixtureCase, mix_dns
from gru_enhance.mixgen.wavio import write_wav
from gru_enhance.neuralnet.checkpoint import save_checkpoint
from gru_enhance.neuralnet.model import ArchConfig, init_params

# ═══════════════════════════════════════════════════════════════════════════════
# Path Constants
# ═══════════════════════════════════════════════════════════════════════════════

PROJECT_ROOT = Path(__file__).parent.parent
SRC_DIR = PROJECT_ROOT / "src"
CONFIGS_DIR = PROJECT_ROOT / "configs"

CORPUS_FILES = 10
CORPUS_CLIP_SECONDS = 2.0


# ═══════════════════════════════════════════════════════════════════════════════
# Signal Generators
# ═══════════════════════════════════════════════════════════════════════════════


def speech_like(seconds: float, seed: int = 0, level: float = 0.3) -> np.ndarray:
    """Voiced harmonic signal with a gliding pitch, syllable envelope and pauses."""
    rng = np.random.default_rng(seed)
    n = int(round(seconds * SAMPLE_RATE))
    t = np.arange(n) / SAMPLE_RATE
    f0 = rng.uniform(110.0, 220.0) * (1.0 + 0.1 * np.sin(2 * np.pi * rng.uniform(0.5, 1.5) * t))
    phase = 2 * np.pi * np.cumsum(f0) / SAMPLE_RATE
    voiced = sum(np.sin(k * phase + rng.uniform(0, 2 * np.pi)) / k for k in range(1, 25))
    syllables = np.maximum(np.sin(2 * np.pi * rng.uniform(3.0, 5.0) * t + rng.uniform(0, np.pi)), 0.0)
    gate = np.ones(n)
    for start in rng.integers(0, max(n - 2400, 1), size=int(seconds)):
        gate[start : start + 2400] = 0.0
    x = voiced * syllables**0.5 * gate + 1e-3 * rng.standard_normal(n)
    return level * x / np.max(np.abs(x))


def noise_like(seconds: float, seed: int = 0, rms: float = 0.05, pole: float = 0.9) -> np.ndarray:
    """First-order colored noise."""
    rng = np.random.default_rng(seed + 10_000)
    n = int(round(seconds * SAMPLE_RATE))
    x = lfilter([1.0], [1.0, -pole], rng.standard_normal(n))
    return rms * x / np.sqrt(np.mean(x * x))


def white_noise(seconds: float, seed: int = 0, rms: float = 0.1) -> np.ndarray:
    rng = np.random.default_rng(seed + 20_000)
    return rms * rng.standard_normal(int(round(seconds * SAMPLE_RATE)))


class SyntheticSampler:
    """Deterministic DNS case source keyed by (step, slot), no files involved."""

    def __init__(self, seconds: float = 1.0, snr_db: float = 0.0, fixed: bool = False):
        self.seconds = seconds
        self.snr_db = snr_db
        self.fixed = fixed
        self.calls: list[tuple[int, int]] = []

    def draw(self, step: int, slot: int = 0) -> MixtureCase:
        self.calls.append((step, slot))
        seed = 0 if self.fixed else 1000 * step + slot
        return mix_dns(speech_like(self.seconds, seed), noise_like(self.seconds, seed), self.snr_db)


# ═══════════════════════════════════════════════════════════════════════════════
# Signal Fixtures
# ═══════════════════════════════════════════════════════════════════════════════


@pytest.fixture
def rng():
    """Seeded generator."""
    return np.random.default_rng(1234)


@pytest.fixture
def speech():
    """Three seconds of speech surrogate."""
    return speech_like(3.0, seed=1)


@pytest.fixture
def noise():
    """Three seconds of colored noise."""
    return noise_like(3.0, seed=1)


@pytest.fixture
def dns_sampler():
    """Deterministic one-second DNS case source."""
    return SyntheticSampler(seconds=1.0)


# ═══════════════════════════════════════════════════════════════════════════════
# Corpus Fixtures
# ═══════════════════════════════════════════════════════════════════════════════


@pytest.fixture
def corpus(tmp_path):
    """Ten speech and ten noise WAV files of two seconds each.

    Returns:
        (speech_dir, noise_dir)
    """
    speech_dir = tmp_path / "corpus" / "speech"
    noise_dir = tmp_path / "corpus" / "noise"
    for i in range(CORPUS_FILES):
        write_wav(speech_dir / f"talker_{i:02d}.wav", speech_like(CORPUS_CLIP_SECONDS, seed=i))
        write_wav(noise_dir / f"noise_{i:02d}.wav", noise_like(CORPUS_CLIP_SECONDS, seed=i, rms=0.1))
    return speech_dir, noise_dir


@pytest.fixture
def manifest(corpus):
    """8:1:1 split of the synthetic corpus."""
    speech_dir, noise_dir = corpus
    return split_manifest(scan_corpus(speech_dir), scan_corpus(noise_dir), seed=0)


# ═══════════════════════════════════════════════════════════════════════════════
# Model Fixtures
# ═══════════════════════════════════════════════════════════════════════════════

TINY_257 = ArchConfig(output_bins=257, hidden=8, channels=1, name="custom")


def identity_params(arch: ArchConfig):
    """Parameters whose mask is 1 to float precision (zero weights, large output bias)."""
    params = init_params(arch, seed=0)
    for name, tensor in params.items():
        tensor[...] = 0.0
    params["output.bias"][...] = 50.0
    return params


@pytest.fixture
def identity_checkpoint(tmp_path):
    """Single-channel checkpoint with a forced mask of 1."""
    path = tmp_path / "identity_dns.ckpt"
    save_checkpoint(identity_params(TINY_257), TINY_257, {"task": "DNS"}, path)
    return path


@pytest.fixture
def identity_checkpoint_aec(tmp_path):
    """Two-channel AEC_LAEC checkpoint with a forced mask of 1."""
    arch = ArchConfig(output_bins=257, hidden=8, channels=2, name="custom")
    path = tmp_path / "identity_aec.ckpt"
    save_checkpoint(identity_params(arch), arch, {"task": "AEC_LAEC"}, path)
    return path
