"""
Tests for PCM16 WAV reading and writing.
"""

import numpy as np
import pytest
import soundfile as sf

from gru_enhance.errors import CorruptFileError, InvalidInputError, UnsupportedFormatError
from gru_enhance.mixgen.wavio import PCM_SCALE, load_wav, to_pcm16, wav_duration, write_wav

from tests.conftest import speech_like


class TestWriteAndLoad:
    """Tests for write_wav and load_wav."""

    def test_round_trip_within_half_lsb(self, tmp_path):
        """Test samples survive quantization to within half an LSB."""
        x = speech_like(1.0, seed=2)
        path = tmp_path / "x.wav"
        write_wav(path, x)
        y = load_wav(path)
        assert y.dtype == np.float64
        assert y.shape == x.shape
        assert np.max(np.abs(y - x)) <= 0.5 / PCM_SCALE + 1e-15

    def test_quantized_values_are_exact(self, tmp_path):
        """Test already-quantized samples come back bit-exact."""
        x = np.array([-32768, -1, 0, 1, 12345, 32767]) / PCM_SCALE
        path = tmp_path / "q.wav"
        write_wav(path, x)
        np.testing.assert_array_equal(load_wav(path), x)

    def test_saturates(self):
        """Test out-of-range samples clip to the int16 limits."""
        q = to_pcm16(np.array([1.5, -2.0, 0.999999]))
        assert q.tolist() == [32767, -32768, 32767]

    def test_creates_parent_directory(self, tmp_path):
        """Test parent directories are created."""
        path = tmp_path / "a" / "b" / "x.wav"
        write_wav(path, np.zeros(160))
        assert path.exists()

    def test_rejects_non_finite(self, tmp_path):
        """Test NaN samples cannot be written."""
        with pytest.raises(InvalidInputError):
            write_wav(tmp_path / "x.wav", np.array([0.0, np.inf]))

    def test_rejects_stereo_array(self, tmp_path):
        """Test two-dimensional input cannot be written."""
        with pytest.raises(InvalidInputError):
            write_wav(tmp_path / "x.wav", np.zeros((10, 2)))

    def test_duration(self, tmp_path):
        """Test wav_duration reads the header."""
        path = tmp_path / "x.wav"
        write_wav(path, np.zeros(24000))
        assert wav_duration(path) == pytest.approx(1.5)


class TestLoadErrors:
    """Tests for load_wav input validation."""

    def test_missing_file(self, tmp_path):
        """Test missing file raises FileNotFoundError."""
        with pytest.raises(FileNotFoundError):
            load_wav(tmp_path / "absent.wav")

    def test_not_riff(self, tmp_path):
        """Test a non-WAV file is rejected as unsupported."""
        path = tmp_path / "text.wav"
        path.write_bytes(b"this is not audio at all")
        with pytest.raises(UnsupportedFormatError):
            load_wav(path)

    def test_too_short(self, tmp_path):
        """Test a file shorter than a RIFF header is corrupt."""
        path = tmp_path / "short.wav"
        path.write_bytes(b"RIFF")
        with pytest.raises(CorruptFileError):
            load_wav(path)

    def test_truncated(self, tmp_path):
        """Test a file cut short of its declared size is corrupt."""
        path = tmp_path / "cut.wav"
        write_wav(path, speech_like(1.0))
        data = path.read_bytes()
        path.write_bytes(data[: len(data) // 2])
        with pytest.raises(CorruptFileError):
            load_wav(path)

    def test_wrong_sample_rate(self, tmp_path):
        """Test 8 kHz audio is rejected."""
        path = tmp_path / "8k.wav"
        sf.write(str(path), np.zeros(800, dtype=np.int16), 8000, subtype="PCM_16")
        with pytest.raises(UnsupportedFormatError):
            load_wav(path)

    def test_stereo(self, tmp_path):
        """Test two-channel audio is rejected."""
        path = tmp_path / "stereo.wav"
        sf.write(str(path), np.zeros((1600, 2), dtype=np.int16), 16000, subtype="PCM_16")
        with pytest.raises(UnsupportedFormatError):
            load_wav(path)

    def test_float_encoding(self, tmp_path):
        """Test float WAV is rejected."""
        path = tmp_path / "float.wav"
        sf.write(str(path), np.zeros(1600), 16000, subtype="FLOAT")
        with pytest.raises(UnsupportedFormatError):
            load_wav(path)
