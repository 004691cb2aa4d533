"""
Tests for checkpoint save/load and integrity checks.
"""

import numpy as np
import pytest

from gru_enhance.errors import ConfigMismatchError, CorruptCheckpointError
from gru_enhance.neuralnet.checkpoint import (
    HEADER,
    content_hash,
    load_checkpoint,
    read_manifest,
    save_checkpoint,
)
from gru_enhance.neuralnet.model import ArchConfig, init_params

ARCH = ArchConfig(output_bins=10, hidden=4, channels=1, name="custom")


@pytest.fixture
def saved(tmp_path):
    """A small saved checkpoint and its params."""
    params = init_params(ARCH, seed=7)
    path = tmp_path / "model.ckpt"
    digest = save_checkpoint(params, ARCH, {"task": "DNS", "step": 12}, path)
    return path, params, digest


class TestSaveLoad:
    """Tests for save_checkpoint and load_checkpoint."""

    def test_round_trip(self, saved):
        """Test params, arch and metadata survive a round trip."""
        path, params, digest = saved
        ckpt = load_checkpoint(path)
        assert ckpt.arch == ARCH
        assert ckpt.meta == {"task": "DNS", "step": 12}
        assert ckpt.content_hash == digest
        for name in params:
            np.testing.assert_array_equal(ckpt.params[name], params[name])
            assert ckpt.params[name].dtype == np.float32

    def test_extra_tensors(self, tmp_path):
        """Test optimizer tensors are stored apart from the params."""
        params = init_params(ARCH)
        extra = {"adam.m.input.bias": np.arange(4, dtype=np.float32)}
        path = tmp_path / "x.ckpt"
        save_checkpoint(params, ARCH, {}, path, extra=extra)
        ckpt = load_checkpoint(path)
        assert set(ckpt.params) == set(params)
        np.testing.assert_array_equal(ckpt.extra["adam.m.input.bias"], extra["adam.m.input.bias"])

    def test_no_temp_file_left(self, saved):
        """Test the atomic write leaves no temporary file behind."""
        path, _, _ = saved
        assert [p.name for p in path.parent.iterdir()] == ["model.ckpt"]

    def test_arch_mismatch_on_save(self, tmp_path):
        """Test params cannot be saved under another arch."""
        params = init_params(ARCH)
        other = ArchConfig(output_bins=10, hidden=5)
        with pytest.raises(ConfigMismatchError):
            save_checkpoint(params, other, {}, tmp_path / "x.ckpt")

    def test_extra_shadowing_param(self, tmp_path):
        """Test an extra tensor cannot reuse a parameter name."""
        params = init_params(ARCH)
        with pytest.raises(ConfigMismatchError):
            save_checkpoint(params, ARCH, {}, tmp_path / "x.ckpt", extra={"input.bias": np.zeros(4)})


class TestIntegrity:
    """Tests for corruption and mismatch detection."""

    def test_missing_file(self, tmp_path):
        """Test a missing checkpoint raises FileNotFoundError."""
        with pytest.raises(FileNotFoundError):
            load_checkpoint(tmp_path / "absent.ckpt")

    def test_truncated(self, saved):
        """Test a truncated file is corrupt."""
        path, _, _ = saved
        data = path.read_bytes()
        path.write_bytes(data[:-8])
        with pytest.raises(CorruptCheckpointError):
            load_checkpoint(path)

    def test_flipped_byte(self, saved):
        """Test a modified tensor byte fails the content hash."""
        path, _, _ = saved
        data = bytearray(path.read_bytes())
        data[-3] ^= 0xFF
        path.write_bytes(bytes(data))
        with pytest.raises(CorruptCheckpointError):
            load_checkpoint(path)

    def test_bad_magic(self, saved):
        """Test a foreign file is rejected."""
        path, _, _ = saved
        data = bytearray(path.read_bytes())
        data[:8] = b"NOTACKPT"
        path.write_bytes(bytes(data))
        with pytest.raises(CorruptCheckpointError):
            load_checkpoint(path)

    def test_tiny_file(self, tmp_path):
        """Test a file shorter than the header is corrupt."""
        path = tmp_path / "tiny.ckpt"
        path.write_bytes(b"GRU")
        with pytest.raises(CorruptCheckpointError):
            load_checkpoint(path)

    def test_expected_arch(self, saved):
        """Test a requested arch must match the stored one."""
        path, _, _ = saved
        with pytest.raises(ConfigMismatchError):
            load_checkpoint(path, expected_arch=ArchConfig(output_bins=10, hidden=8))

    def test_channel_mismatch(self, saved):
        """Test a single-channel checkpoint refuses two-channel input."""
        path, _, _ = saved
        with pytest.raises(ConfigMismatchError):
            load_checkpoint(path, channels=2)


class TestContentHash:
    """Tests for the stored content hash."""

    def test_git_blob_hash(self):
        """Test the hash matches git's blob hash of the same bytes."""
        assert content_hash(b"") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391"

    def test_hash_covers_tensor_section(self, saved):
        """Test the manifest hash equals the hash of the tensor bytes."""
        path, _, digest = saved
        manifest, payload = read_manifest(path)
        assert manifest["content_hash"] == digest == content_hash(payload)
        assert HEADER.size == 16
