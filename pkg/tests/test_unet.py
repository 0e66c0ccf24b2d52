"""Network shape contracts, the attention block, and end-to-end gradients."""

import numpy as np
import pytest

from bandopt.gradcheck import randomize_biases, unet_param_spot_check
from bandopt.unet import UNet, UNetConfig, se_attention_forward


class TestConfig:
    def test_se_hidden_width(self):
        assert UNetConfig(in_channels=12, se_reduction=4).se_hidden == 3
        assert UNetConfig(in_channels=2, se_reduction=4).se_hidden == 1
        assert UNetConfig(in_channels=9, se_reduction=4).se_hidden == 2

    def test_invalid_config_rejected(self):
        with pytest.raises(ValueError):
            UNetConfig(in_channels=0)
        with pytest.raises(ValueError):
            UNetConfig(in_channels=3, depth=0)


class TestForward:
    def test_output_shape_and_range(self, rng):
        model = UNet(UNetConfig(in_channels=5, base_filters=4, depth=2, seed=1))
        x = rng.standard_normal((4, 32, 32, 5)).astype(np.float32)
        pred, _ = model.forward(x)
        assert pred.shape == (4, 32, 32, 1)
        assert np.all(pred > 0) and np.all(pred < 1)

    def test_indivisible_dims_rejected(self, rng):
        model = UNet(UNetConfig(in_channels=2, depth=2))
        with pytest.raises(ValueError, match="divisible by 4"):
            model.forward(rng.standard_normal((1, 30, 32, 2)))

    def test_channel_mismatch_rejected(self, rng):
        model = UNet(UNetConfig(in_channels=2))
        with pytest.raises(ValueError, match="channels"):
            model.forward(rng.standard_normal((1, 8, 8, 3)))

    def test_params_are_pure_function_of_config(self):
        cfg = UNetConfig(in_channels=3, base_filters=8, depth=2, seed=7)
        a, b = UNet(cfg), UNet(cfg)
        assert list(a.params) == list(b.params)
        for name in a.params:
            assert a.params[name].tobytes() == b.params[name].tobytes()

    def test_depth_one_works(self, rng):
        model = UNet(UNetConfig(in_channels=2, base_filters=4, depth=1, seed=0))
        pred, cache = model.forward(rng.standard_normal((2, 8, 8, 2)).astype(np.float32))
        assert pred.shape == (2, 8, 8, 1)
        grads, _ = model.backward(cache, np.ones_like(pred))
        assert set(grads) == set(model.params)


class TestSEAttention:
    def test_zero_params_halve_the_input(self, rng):
        x = rng.standard_normal((2, 4, 4, 3))
        y, h, _ = se_attention_forward(x, np.zeros((3, 1)), np.zeros(1),
                                       np.zeros((1, 3)), np.zeros(3))
        assert np.allclose(h, 0.5)
        assert np.allclose(y, 0.5 * x)

    def test_zero_channel_stays_zero(self, rng):
        x = rng.standard_normal((2, 4, 4, 3))
        x[..., 1] = 0.0
        w1 = rng.standard_normal((3, 1))
        w2 = rng.standard_normal((1, 3))
        y, _, _ = se_attention_forward(x, w1, np.zeros(1), w2, np.zeros(3))
        assert np.all(y[..., 1] == 0.0)

    def test_weights_in_unit_interval(self, rng):
        x = rng.standard_normal((3, 4, 4, 6))
        w1 = rng.standard_normal((6, 2))
        w2 = rng.standard_normal((2, 6))
        _, h, _ = se_attention_forward(x, w1, rng.standard_normal(2),
                                       w2, rng.standard_normal(6))
        assert np.all(h > 0) and np.all(h < 1)

    def test_output_norm_never_exceeds_input_norm(self, rng):
        x = rng.standard_normal((2, 8, 8, 5))
        w1 = rng.standard_normal((5, 2))
        w2 = rng.standard_normal((2, 5))
        y, _, _ = se_attention_forward(x, w1, rng.standard_normal(2),
                                       w2, rng.standard_normal(5))
        norm_in = np.linalg.norm(x.reshape(-1, 5), axis=0)
        norm_out = np.linalg.norm(y.reshape(-1, 5), axis=0)
        assert np.all(norm_out <= norm_in)

    def test_channel_mismatch_rejected(self, rng):
        x = rng.standard_normal((1, 4, 4, 3))
        with pytest.raises(ValueError, match="channels"):
            se_attention_forward(x, np.zeros((4, 1)), np.zeros(1),
                                 np.zeros((1, 4)), np.zeros(4))


class TestEndToEnd:
    def test_param_gradients_match_finite_differences(self, rng):
        target = (rng.uniform(0, 1, (2, 8, 8, 1)) > 0.5).astype(np.float64)
        x = rng.standard_normal((2, 8, 8, 3))
        for attention in (False, True):
            model = UNet(UNetConfig(in_channels=3, base_filters=4, depth=2,
                                    use_input_attention=attention, seed=3),
                         dtype=np.float64)
            randomize_biases(model, seed=4)
            res = unet_param_spot_check(model, x, target, n_coords=24, seed=5)
            assert res.passed, str(res)
