"""Corpus management and mixture synthesis.

Modules:
    wavio: PCM16 mono 16 kHz WAV I/O
    mixer: SNR / ESR scaling and DNS / AEC mixing
    manifest: Corpus listing, 8:1:1 splits, clip loading with access log
    sampler: Seeded online sampling (MixSpec, OnlineMixer)
    testset: Persisted pre-mixed test sets
"""

from gru_enhance.mixgen.manifest import (
    ClipStore,
    CorpusEntry,
    CorpusManifest,
    scan_corpus,
    split_manifest,
)
from gru_enhance.mixgen.mixer import (
    DNS_TEST_SNR_RANGE_DB,
    DNS_TRAIN_SNR_RANGE_ALT_DB,
    MAX_DELAY_SAMPLES,
    TRAIN_ESR_RANGE_DB,
    TRAIN_SNR_RANGE_DB,
    MixtureCase,
    fit_length,
    measure_snr,
    mix_aec,
    mix_dns,
    scale_for_snr,
    snr_tag,
)
from gru_enhance.mixgen.sampler import MixSpec, OnlineMixer, draw_case
from gru_enhance.mixgen.testset import load_case, load_testset, synth_testset
from gru_enhance.mixgen.wavio import load_wav, write_wav

__all__ = [
    # WAV I/O
    "load_wav",
    "write_wav",
    # Mixing
    "MixtureCase",
    "MAX_DELAY_SAMPLES",
    "TRAIN_SNR_RANGE_DB",
    "DNS_TRAIN_SNR_RANGE_ALT_DB",
    "DNS_TEST_SNR_RANGE_DB",
    "TRAIN_ESR_RANGE_DB",
    "measure_snr",
    "scale_for_snr",
    "fit_length",
    "mix_dns",
    "mix_aec",
    "snr_tag",
    # Corpus
    "CorpusEntry",
    "CorpusManifest",
    "ClipStore",
    "scan_corpus",
    "split_manifest",
    # Sampling
    "MixSpec",
    "OnlineMixer",
    "draw_case",
    # Test sets
    "synth_testset",
    "load_testset",
    "load_case",
]
