"""
Tests for mixture synthesis, corpus splitting, online sampling and test sets.
"""

import numpy as np
import pytest

from gru_enhance.errors import (
    CorruptTestsetError,
    DegenerateSignalError,
    InsufficientCorpusError,
    InvalidConfigError,
    InvalidDelayError,
)
from gru_enhance.mixgen.manifest import ClipStore, CorpusManifest, scan_corpus, split_manifest
from gru_enhance.mixgen.mixer import (
    MAX_DELAY_SAMPLES,
    fit_length,
    mean_power,
    measure_snr,
    mix_aec,
    mix_dns,
    scale_for_snr,
    snr_tag,
)
from gru_enhance.mixgen.sampler import MixSpec, OnlineMixer
from gru_enhance.mixgen.testset import load_case, load_testset, read_meta, synth_testset

from tests.conftest import speech_like

# ═══════════════════════════════════════════════════════════════════════════════
# Mixer
# ═══════════════════════════════════════════════════════════════════════════════


class TestMixDns:
    """Tests for mix_dns and SNR scaling."""

    @pytest.mark.parametrize("snr", [-15.0, -5.0, 0.0, 7.5, 15.0])
    def test_achieves_requested_snr(self, speech, noise, snr):
        """Test the measured clean/noise ratio equals the request."""
        case = mix_dns(speech, noise, snr)
        assert measure_snr(case.clean, case.noise) == pytest.approx(snr, abs=1e-9)
        assert case.snr_db == snr

    def test_mixture_identity(self, speech, noise):
        """Test mic equals clean plus scaled noise."""
        case = mix_dns(speech, noise, 3.0)
        assert case.identity_error() == 0.0
        assert not case.is_aec

    def test_clean_unchanged(self, speech, noise):
        """Test the clean component is not rescaled."""
        case = mix_dns(speech, noise, 3.0)
        np.testing.assert_array_equal(case.clean, speech)

    def test_silent_noise(self, speech):
        """Test silent noise cannot be scaled to an SNR."""
        with pytest.raises(DegenerateSignalError):
            mix_dns(speech, np.zeros_like(speech), 0.0)

    def test_silent_target(self, noise):
        """Test a silent target has no defined SNR."""
        with pytest.raises(DegenerateSignalError):
            scale_for_snr(np.zeros_like(noise), noise, 0.0)


class TestFitLength:
    """Tests for fit_length."""

    def test_loops_short_clip(self, rng):
        """Test a short clip is tiled to the requested length."""
        out = fit_length(np.arange(5.0), 12, rng)
        assert out.tolist() == [0, 1, 2, 3, 4, 0, 1, 2, 3, 4, 0, 1]

    def test_crops_long_clip(self, rng):
        """Test a long clip is cropped to a contiguous window."""
        clip = np.arange(100.0)
        out = fit_length(clip, 10, rng)
        assert out.size == 10
        assert np.all(np.diff(out) == 1.0)

    def test_exact_length_unchanged(self, rng):
        """Test a clip of the right length is returned whole."""
        clip = np.arange(10.0)
        np.testing.assert_array_equal(fit_length(clip, 10, rng), clip)


class TestMixAec:
    """Tests for mix_aec."""

    def test_levels_and_identity(self, speech, noise):
        """Test ESR and SNR are both referenced to clean and the mix is exact."""
        farend = speech_like(3.0, seed=9)
        case = mix_aec(speech, noise, farend, esr_db=5.0, snr_db=10.0, delay_samples=1600)
        assert 10 * np.log10(mean_power(case.echo) / mean_power(case.clean)) == pytest.approx(5.0)
        assert measure_snr(case.clean, case.noise) == pytest.approx(10.0)
        assert case.identity_error() == pytest.approx(0.0, abs=1e-15)
        assert case.is_aec

    def test_pure_delay_echo(self, speech):
        """Test the default echo path is a scaled pure delay of the far end."""
        farend = speech_like(3.0, seed=9)
        delay = 800
        case = mix_aec(speech, None, farend, esr_db=0.0, snr_db=0.0, delay_samples=delay)
        assert np.all(case.echo[:delay] == 0.0)
        head = farend[:-delay]
        gain = np.dot(case.echo[delay:], head) / np.dot(head, head)
        np.testing.assert_allclose(case.echo[delay:], gain * head, rtol=1e-9, atol=1e-15)

    def test_no_noise(self, speech):
        """Test noise=None mixes without noise."""
        case = mix_aec(speech, None, speech_like(3.0, seed=9), 0.0, 0.0, 0)
        assert np.all(case.noise == 0.0)
        assert case.snr_db == float("inf")

    def test_silent_farend(self, speech, noise):
        """Test a silent far end yields a zero echo and no ESR."""
        case = mix_aec(speech, noise, np.zeros_like(speech), 5.0, 5.0, 100)
        assert np.all(case.echo == 0.0)
        assert case.esr_db is None
        assert case.identity_error() == 0.0

    @pytest.mark.parametrize("delay", [-1, MAX_DELAY_SAMPLES + 1])
    def test_delay_bounds(self, speech, delay):
        """Test delays outside [0, 500 ms] are rejected."""
        with pytest.raises(InvalidDelayError):
            mix_aec(speech, None, speech, 0.0, 0.0, delay)

    def test_max_delay_accepted(self, speech):
        """Test a delay of exactly 8000 samples is accepted."""
        case = mix_aec(speech, None, speech_like(3.0, seed=9), 0.0, 0.0, MAX_DELAY_SAMPLES)
        assert case.delay_samples == 8000


class TestSnrTag:
    """Tests for snr_tag."""

    def test_boundary(self):
        """Test 0 dB is high and anything below is low."""
        assert snr_tag(0.0) == "high"
        assert snr_tag(-0.01) == "low"
        assert snr_tag(-15.0) == "low"
        assert snr_tag(15.0) == "high"


# ═══════════════════════════════════════════════════════════════════════════════
# Manifest
# ═══════════════════════════════════════════════════════════════════════════════


def _names(n, prefix):
    return [f"/corpus/{prefix}_{i:03d}.wav" for i in range(n)]


class TestSplitManifest:
    """Tests for split_manifest."""

    def test_ten_files_split_8_1_1(self):
        """Test ten files per category split 8:1:1."""
        m = split_manifest(_names(10, "s"), _names(10, "n"), seed=0)
        for cat in ("speech", "noise"):
            assert m.counts()[cat] == {"train": 8, "val": 1, "test": 1}

    def test_thirty_files(self):
        """Test thirty files split 24:3:3."""
        m = split_manifest(_names(30, "s"), _names(30, "n"), seed=0)
        assert m.counts()["speech"] == {"train": 24, "val": 3, "test": 3}

    def test_disjoint_and_complete(self):
        """Test splits are pairwise disjoint and cover every file."""
        files = _names(37, "s")
        m = split_manifest(files, _names(12, "n"), seed=5)
        parts = [set(m.paths("speech", s)) for s in ("train", "val", "test")]
        assert sum(len(p) for p in parts) == len(files)
        assert set().union(*parts) == set(files)

    def test_deterministic(self):
        """Test the same seed reproduces the same split regardless of input order."""
        files = _names(20, "s")
        a = split_manifest(files, _names(10, "n"), seed=3)
        b = split_manifest(list(reversed(files)), _names(10, "n"), seed=3)
        assert a == b

    def test_seed_changes_split(self):
        """Test different seeds give different splits."""
        files = _names(50, "s")
        base = split_manifest(files, _names(10, "n"), seed=0)
        others = [split_manifest(files, _names(10, "n"), seed=s) for s in range(1, 6)]
        assert any(o.paths("speech", "test") != base.paths("speech", "test") for o in others)

    def test_too_few_files(self):
        """Test fewer than ten files per category is rejected."""
        with pytest.raises(InsufficientCorpusError):
            split_manifest(_names(9, "s"), _names(10, "n"), seed=0)
        with pytest.raises(InsufficientCorpusError):
            split_manifest(_names(10, "s"), _names(3, "n"), seed=0)

    def test_save_load(self, tmp_path):
        """Test a saved manifest loads back equal."""
        m = split_manifest(_names(12, "s"), _names(11, "n"), seed=7)
        path = tmp_path / "manifest.json"
        m.save(path)
        assert CorpusManifest.load(path) == m


class TestScanCorpus:
    """Tests for scan_corpus."""

    def test_lists_wavs_with_durations(self, corpus):
        """Test every WAV is listed, sorted, with its duration."""
        speech_dir, _ = corpus
        entries = scan_corpus(speech_dir)
        assert len(entries) == 10
        assert [e.path for e in entries] == sorted(e.path for e in entries)
        assert all(e.duration_s == pytest.approx(2.0) for e in entries)

    def test_missing_directory(self, tmp_path):
        """Test a missing directory raises FileNotFoundError."""
        with pytest.raises(FileNotFoundError):
            scan_corpus(tmp_path / "nope")


class TestClipStore:
    """Tests for ClipStore."""

    @staticmethod
    def _counting_loader(calls):
        def load(path):
            calls.append(path)
            return np.full(4, float(len(calls)))

        return load

    def test_repeat_reads_hit_cache(self):
        """Test a cached clip is decoded once and returned as the same array."""
        calls = []
        store = ClipStore(self._counting_loader(calls), max_clips=2)
        first = store.get("a.wav")
        assert store.get("a.wav") is first
        assert calls == ["a.wav"]
        assert (store.hits, store.misses) == (1, 1)

    def test_evicts_least_recently_used(self):
        """Test the cache never exceeds its cap and drops the oldest unused clip."""
        calls = []
        store = ClipStore(self._counting_loader(calls), max_clips=2)
        for path in ("a.wav", "b.wav", "a.wav", "c.wav"):
            store.get(path)
        assert store.cached == 2
        store.get("a.wav")
        store.get("b.wav")
        assert calls == ["a.wav", "b.wav", "c.wav", "b.wav"]

    def test_stays_bounded_over_many_files(self):
        """Test reading many distinct files keeps memory at the cap while the read set is complete."""
        store = ClipStore(lambda path: np.zeros(8), max_clips=3)
        paths = [f"clip{i}.wav" for i in range(50)]
        for path in paths * 2:
            store.get(path)
        assert store.cached == 3
        assert store.accessed() == set(paths)

    def test_zero_disables_cache(self):
        """Test max_clips=0 reads from the loader every time."""
        calls = []
        store = ClipStore(self._counting_loader(calls), max_clips=0)
        store.get("a.wav")
        store.get("a.wav")
        assert calls == ["a.wav", "a.wav"]
        assert store.cached == 0
        assert store.accessed() == {"a.wav"}

    def test_negative_cap_rejected(self):
        """Test a negative cache size is refused."""
        with pytest.raises(ValueError):
            ClipStore(max_clips=-1)


# ═══════════════════════════════════════════════════════════════════════════════
# Online Sampling
# ═══════════════════════════════════════════════════════════════════════════════


class TestMixSpec:
    """Tests for MixSpec validation."""

    def test_delay_limit(self):
        """Test max_delay_ms above 500 is rejected."""
        with pytest.raises(InvalidDelayError):
            MixSpec(max_delay_ms=501)

    def test_unknown_task(self):
        """Test only DNS and AEC are accepted."""
        with pytest.raises(InvalidConfigError):
            MixSpec(task="AGC")

    def test_empty_range(self):
        """Test an inverted SNR range is rejected."""
        with pytest.raises(InvalidConfigError):
            MixSpec(snr_range_db=(10.0, -5.0))


class TestOnlineMixer:
    """Tests for OnlineMixer."""

    def test_same_draw_is_reproducible(self, manifest):
        """Test (step, slot) fully determines the case."""
        spec = MixSpec(duration_s=1.0, seed=11)
        a = OnlineMixer(manifest, spec).draw(4, 1)
        b = OnlineMixer(manifest, spec).draw(4, 1)
        np.testing.assert_array_equal(a.mic, b.mic)
        assert a.snr_db == b.snr_db

    def test_different_steps_differ(self, manifest):
        """Test distinct steps give distinct cases."""
        mixer = OnlineMixer(manifest, MixSpec(duration_s=1.0))
        assert not np.array_equal(mixer.draw(0).mic, mixer.draw(1).mic)

    def test_snr_within_range(self, manifest):
        """Test drawn SNRs fall in the configured range and are realized."""
        mixer = OnlineMixer(manifest, MixSpec(duration_s=1.0, snr_range_db=(-5.0, 10.0)))
        for step in range(5):
            case = mixer.draw(step)
            assert -5.0 <= case.snr_db <= 10.0
            assert measure_snr(case.clean, case.noise) == pytest.approx(case.snr_db, abs=1e-9)
            assert case.mic.size == 16000

    def test_reads_only_its_split(self, manifest):
        """Test the train mixer never touches validation or test files."""
        store = ClipStore()
        mixer = OnlineMixer(manifest, MixSpec(duration_s=1.0), store=store)
        for step in range(20):
            mixer.draw(step)
        allowed = set(manifest.paths("speech", "train")) | set(manifest.paths("noise", "train"))
        assert store.accessed() <= allowed

    def test_rejects_test_split(self, manifest):
        """Test online mixing refuses the test split."""
        with pytest.raises(InvalidConfigError):
            OnlineMixer(manifest, MixSpec(), split="test")

    def test_aec_draw(self, manifest):
        """Test AEC cases carry a distinct far-end talker and bounded delay."""
        spec = MixSpec(task="AEC", duration_s=1.0, max_delay_ms=200)
        for step in range(5):
            case = OnlineMixer(manifest, spec).draw(step)
            assert case.is_aec
            assert 0 <= case.delay_samples <= 3200
            assert case.meta["farend_file"] != case.meta["clean_file"]
            assert -5.0 <= case.esr_db <= 10.0

    def test_aec_fixed_noise_snr(self, manifest):
        """Test aec_noise_snr_db pins the noise level."""
        spec = MixSpec(task="AEC", duration_s=1.0, aec_noise_snr_db=20.0)
        case = OnlineMixer(manifest, spec).draw(0)
        assert measure_snr(case.clean, case.noise) == pytest.approx(20.0)


# ═══════════════════════════════════════════════════════════════════════════════
# Test Sets
# ═══════════════════════════════════════════════════════════════════════════════


class TestSynthTestset:
    """Tests for synth_testset and load_testset."""

    def test_writes_cases(self, manifest, tmp_path):
        """Test each case directory holds its WAVs and metadata."""
        spec = MixSpec(duration_s=1.0, snr_range_db=(-15.0, 15.0), seed=2)
        dirs = synth_testset(manifest, spec, 3, tmp_path / "ts")
        assert [d.name for d in dirs] == ["case_000000", "case_000001", "case_000002"]
        for d in dirs:
            for name in ("mic", "clean", "noise"):
                assert (d / f"{name}.wav").exists()
            meta = read_meta(d / "meta.txt")
            assert meta["tag"] == snr_tag(float(meta["snr_db"]))
            assert meta["esr_db"] == "none"

    def test_mixture_identity_survives_disk(self, manifest, tmp_path):
        """Test the loaded mic equals the sum of the loaded components exactly."""
        spec = MixSpec(duration_s=1.0, snr_range_db=(-15.0, 15.0))
        synth_testset(manifest, spec, 4, tmp_path / "ts")
        cases = load_testset(tmp_path / "ts")
        assert len(cases) == 4
        assert all(c.identity_error() == 0.0 for c in cases)

    def test_aec_identity_survives_disk(self, manifest, tmp_path):
        """Test AEC cases reload with far end and echo and an exact identity."""
        spec = MixSpec(task="AEC", duration_s=1.0, aec_noise_snr_db=10.0)
        synth_testset(manifest, spec, 2, tmp_path / "ts")
        for case in load_testset(tmp_path / "ts"):
            assert case.farend is not None and case.echo is not None
            assert case.identity_error() == 0.0

    def test_reads_only_test_split(self, manifest, tmp_path):
        """Test synthesis draws from the test split only."""
        store = ClipStore()
        synth_testset(manifest, MixSpec(duration_s=1.0), 5, tmp_path / "ts", store=store)
        allowed = set(manifest.paths("speech", "test")) | set(manifest.paths("noise", "test"))
        assert store.accessed() <= allowed

    def test_workers_do_not_change_output(self, manifest, tmp_path):
        """Test parallel synthesis reproduces serial synthesis."""
        spec = MixSpec(duration_s=1.0, seed=4)
        synth_testset(manifest, spec, 4, tmp_path / "a", workers=1)
        synth_testset(manifest, spec, 4, tmp_path / "b", workers=3)
        for a, b in zip(load_testset(tmp_path / "a"), load_testset(tmp_path / "b")):
            np.testing.assert_array_equal(a.mic, b.mic)

    def test_zero_count(self, manifest, tmp_path):
        """Test a count of zero writes an empty set."""
        assert synth_testset(manifest, MixSpec(duration_s=1.0), 0, tmp_path / "ts") == []
        assert load_testset(tmp_path / "ts") == []

    def test_missing_meta(self, manifest, tmp_path):
        """Test a case without metadata is corrupt."""
        (case_dir,) = synth_testset(manifest, MixSpec(duration_s=1.0), 1, tmp_path / "ts")
        (case_dir / "meta.txt").unlink()
        with pytest.raises(CorruptTestsetError):
            load_case(case_dir)

    def test_missing_mic(self, manifest, tmp_path):
        """Test a case without its mic WAV is corrupt."""
        (case_dir,) = synth_testset(manifest, MixSpec(duration_s=1.0), 1, tmp_path / "ts")
        (case_dir / "mic.wav").unlink()
        with pytest.raises(CorruptTestsetError):
            load_case(case_dir)

    def test_missing_directory(self, tmp_path):
        """Test loading a missing test set raises FileNotFoundError."""
        with pytest.raises(FileNotFoundError):
            load_testset(tmp_path / "absent")
