"""
Tests for the mask network: sizes, forward/streaming agreement, causality
and reverse-mode gradients.
"""

import numpy as np
import pytest

from gru_enhance.errors import InvalidConfigError, InvalidStateError, ShapeError
from gru_enhance.neuralnet.model import (
    ARCH_PRESETS,
    ArchConfig,
    GruState,
    arch_from_name,
    backward,
    forward,
    forward_step,
    init_params,
    macs_per_second,
    param_count,
)

from tests.conftest import TINY_257, identity_params

SMALL = ArchConfig(output_bins=12, hidden=6, channels=1, name="custom")


class TestArchitecture:
    """Tests for presets, parameter counts and compute cost."""

    @pytest.mark.parametrize(
        "name,expected",
        [("GRU-512", 3_415_809), ("GRU-256", 921_601), ("GRU-320", 1_479_937)],
    )
    def test_preset_parameter_counts(self, name, expected):
        """Test the closed-form count for each preset."""
        assert param_count(ARCH_PRESETS[name]) == expected

    def test_allocated_size_matches_count(self):
        """Test init_params allocates exactly param_count values."""
        cfg = ARCH_PRESETS["GRU-256"]
        assert init_params(cfg).size == param_count(cfg)

    def test_ffn_head_counted(self):
        """Test the optional ReLU layer is included in the count."""
        cfg = ArchConfig(output_bins=257, hidden=16, ffn_hidden=32)
        assert init_params(cfg).size == param_count(cfg)
        assert param_count(cfg) > param_count(ArchConfig(output_bins=257, hidden=16))

    def test_macs_per_second(self):
        """Test GRU-512 needs about 0.21 GMAC/s and GRU-256 about 0.057 GMAC/s."""
        assert macs_per_second(ARCH_PRESETS["GRU-512"]) == pytest.approx(0.213e9, rel=0.01)
        assert macs_per_second(ARCH_PRESETS["GRU-256"]) == pytest.approx(0.0574e9, rel=0.01)

    def test_two_channel_input_width(self):
        """Test the two-channel preset reads mic and far-end magnitudes."""
        assert ARCH_PRESETS["GRU-320"].input_bins == 514

    def test_unknown_name(self):
        """Test an unknown preset name is rejected."""
        with pytest.raises(InvalidConfigError):
            arch_from_name("LSTM-1024")

    def test_override_preset(self):
        """Test overrides replace preset fields."""
        cfg = arch_from_name("GRU-256", ffn_hidden=64)
        assert cfg.hidden == 256 and cfg.ffn_hidden == 64

    @pytest.mark.parametrize("kwargs", [{"channels": 3}, {"hidden": 0}, {"ffn_hidden": -1}])
    def test_invalid_config(self, kwargs):
        """Test invalid shapes are rejected."""
        with pytest.raises(InvalidConfigError):
            ArchConfig(**kwargs)

    def test_init_is_seeded(self):
        """Test the same seed gives the same weights."""
        a, b = init_params(SMALL, seed=3), init_params(SMALL, seed=3)
        for name in a:
            np.testing.assert_array_equal(a[name], b[name])


class TestForward:
    """Tests for forward and forward_step."""

    def test_output_shape_and_range(self, rng):
        """Test batched masks have shape (B, T, bins) and lie in (0, 1)."""
        params = init_params(SMALL, seed=1)
        mask, cache = forward(params, rng.uniform(0, 2, (3, 7, 12)))
        assert mask.shape == (3, 7, 12)
        assert np.all((mask > 0.0) & (mask < 1.0))
        assert cache.final_state.h1.shape == (3, 6)

    def test_unbatched(self, rng):
        """Test (T, D) input returns (T, bins)."""
        params = init_params(SMALL, seed=1)
        mask, _ = forward(params, rng.uniform(0, 2, (7, 12)), keep_cache=False)
        assert mask.shape == (7, 12)

    def test_wrong_width(self, rng):
        """Test features of the wrong width are rejected."""
        params = init_params(SMALL, seed=1)
        with pytest.raises(ShapeError):
            forward(params, rng.uniform(0, 2, (7, 13)))

    def test_streaming_matches_batch(self, rng):
        """Test frame-by-frame inference reproduces the sequence forward."""
        params = init_params(SMALL, seed=2)
        feats = rng.uniform(0, 3, (20, 12))
        batch_mask, _ = forward(params, feats, keep_cache=False)
        state = GruState.zeros(SMALL)
        for t in range(20):
            m_t, state = forward_step(params, feats[t], state)
            np.testing.assert_allclose(m_t, batch_mask[t], atol=1e-5)

    def test_state_carries_across_calls(self, rng):
        """Test two halves with the carried state equal one whole pass."""
        params = init_params(SMALL, seed=2)
        feats = rng.uniform(0, 3, (1, 16, 12))
        whole, _ = forward(params, feats, keep_cache=False)
        first, cache = forward(params, feats[:, :8])
        second, _ = forward(params, feats[:, 8:], state=cache.final_state, keep_cache=False)
        np.testing.assert_allclose(np.concatenate([first, second], axis=1), whole, atol=1e-6)

    def test_causal(self, rng):
        """Test changing future frames leaves earlier masks untouched."""
        params = init_params(SMALL, seed=2)
        feats = rng.uniform(0, 3, (10, 12))
        altered = feats.copy()
        altered[6:] = rng.uniform(0, 3, (4, 12))
        a, _ = forward(params, feats, keep_cache=False)
        b, _ = forward(params, altered, keep_cache=False)
        np.testing.assert_allclose(a[:6], b[:6], rtol=0, atol=1e-7)
        assert not np.allclose(a[6:], b[6:])

    def test_identity_parameters(self, rng):
        """Test zero weights and a large output bias give a mask of 1 to float precision."""
        params = identity_params(TINY_257)
        mask, _ = forward(params, rng.uniform(0, 3, (5, 257)), keep_cache=False)
        np.testing.assert_allclose(mask, 1.0, rtol=0, atol=1e-7)

    @pytest.mark.parametrize("bias", [60.0, -120.0])
    def test_saturated_mask_stays_open(self, rng, bias):
        """Test a saturated float32 head still yields masks strictly inside (0, 1)."""
        params = init_params(SMALL, seed=1)
        params["output.bias"][...] = bias
        feats = rng.uniform(0, 2, (4, 12))
        mask, _ = forward(params, feats, keep_cache=False)
        assert mask.dtype == np.float32
        assert np.all((mask > 0.0) & (mask < 1.0))
        m_t, _ = forward_step(params, feats[0], GruState.zeros(SMALL))
        assert np.all((m_t > 0.0) & (m_t < 1.0))


class TestBackward:
    """Tests for backward."""

    def test_requires_cache(self, rng):
        """Test backward refuses an inference-mode forward."""
        params = init_params(SMALL)
        mask, cache = forward(params, rng.uniform(0, 1, (4, 12)), keep_cache=False)
        with pytest.raises(InvalidStateError):
            backward(params, cache, np.ones_like(mask))

    def test_gradient_shapes(self, rng):
        """Test every parameter receives a gradient of its own shape."""
        params = init_params(SMALL)
        mask, cache = forward(params, rng.uniform(0, 1, (2, 4, 12)))
        grads = backward(params, cache, np.ones_like(mask))
        assert list(grads) == list(params)
        for name in params:
            assert grads[name].shape == params[name].shape

    @pytest.mark.parametrize("ffn_hidden", [0, 5])
    def test_matches_finite_difference(self, rng, ffn_hidden):
        """Test reverse-mode gradients of sum(mask * w) against central differences."""
        arch = ArchConfig(output_bins=4, hidden=3, channels=2, ffn_hidden=ffn_hidden)
        params = init_params(arch, seed=5, dtype=np.float64)
        for _, t in params.items():
            if t.ndim == 1:
                t[...] = rng.uniform(-0.2, 0.2, t.shape)
        feats = rng.uniform(0, 2, (2, 4, 8))
        weights = rng.standard_normal((2, 4, 4))

        def objective():
            mask, _ = forward(params, feats, keep_cache=False)
            return float(np.sum(mask * weights))

        mask, cache = forward(params, feats)
        grads = backward(params, cache, weights)
        h = 1e-6
        for name, tensor in params.items():
            for idx in np.ndindex(*tensor.shape):
                orig = tensor[idx]
                tensor[idx] = orig + h
                up = objective()
                tensor[idx] = orig - h
                down = objective()
                tensor[idx] = orig
                numeric = (up - down) / (2 * h)
                assert grads[name][idx] == pytest.approx(numeric, rel=1e-5, abs=1e-8), (name, idx)
