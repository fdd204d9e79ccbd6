import numpy as np
import pytest

from lowlight import nnforward as nf
from lowlight.llgw import GeneratorArch


def conv2d_reference(x, kernel, bias=None, stride=1, pad=0):
    """Naive quadruple-loop cross-correlation oracle (float64)."""
    c_out, c_in, kh, kw = kernel.shape
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad)), mode="reflect") \
        .astype(np.float64)
    _, hp, wp = xp.shape
    oh = (hp - kh) // stride + 1
    ow = (wp - kw) // stride + 1
    out = np.zeros((c_out, oh, ow))
    for o in range(c_out):
        for y in range(oh):
            for x0 in range(ow):
                s = 0.0
                for ci in range(c_in):
                    for i in range(kh):
                        for j in range(kw):
                            s += kernel[o, ci, i, j] \
                                * xp[ci, y * stride + i, x0 * stride + j]
                out[o, y, x0] = s + (bias[o] if bias is not None else 0.0)
    return out


SMALL_ARCH = GeneratorArch(base_filters=8, n_resnet_blocks=2)


class TestConv2d:
    def test_constant_ones_kernel_reflection(self):
        x = np.ones((1, 4, 4), dtype=np.float32)
        k = np.ones((1, 1, 3, 3), dtype=np.float32)
        out = nf.conv2d(x, k, stride=1, pad=1)
        assert out.shape == (1, 4, 4)
        assert np.allclose(out, 9.0, atol=1e-6)

    def test_identity_kernel(self):
        rng = np.random.default_rng(0)
        x = rng.random((2, 6, 6)).astype(np.float32)
        k = np.zeros((2, 2, 3, 3), dtype=np.float32)
        k[0, 0, 1, 1] = 1.0
        k[1, 1, 1, 1] = 1.0
        out = nf.conv2d(x, k, stride=1, pad=1)
        assert np.abs(out - x).max() < 1e-6

    def test_matches_reference_stride2(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((2, 8, 8)).astype(np.float32)
        k = rng.standard_normal((4, 2, 3, 3)).astype(np.float32)
        b = rng.standard_normal(4).astype(np.float32)
        out = nf.conv2d(x, k, b, stride=2, pad=1)
        ref = conv2d_reference(x, k, b, stride=2, pad=1)
        assert out.shape == ref.shape
        assert np.abs(out - ref).max() < 1e-5

    @pytest.mark.parametrize("seed", range(10))
    def test_random_cases_match_reference(self, seed):
        rng = np.random.default_rng(seed + 100)
        c_in = int(rng.integers(1, 4))
        c_out = int(rng.integers(1, 5))
        k = int(rng.choice([1, 3, 4]))
        stride = int(rng.choice([1, 2]))
        pad = int(rng.integers(0, 2))
        h = int(rng.integers(k + 1, 10))
        w = int(rng.integers(k + 1, 10))
        x = rng.standard_normal((c_in, h, w)).astype(np.float32)
        kern = rng.standard_normal((c_out, c_in, k, k)).astype(np.float32)
        bias = rng.standard_normal(c_out).astype(np.float32)
        out = nf.conv2d(x, kern, bias, stride=stride, pad=pad)
        ref = conv2d_reference(x, kern, bias, stride=stride, pad=pad)
        assert np.abs(out - ref).max() < 1e-5

    def test_channel_mismatch_rejected(self):
        with pytest.raises(ValueError):
            nf.conv2d(np.zeros((2, 4, 4), dtype=np.float32),
                      np.zeros((1, 3, 3, 3), dtype=np.float32))


class TestInstanceNorm:
    def test_constant_channel_zeroed(self):
        x = np.full((1, 4, 4), 0.8, dtype=np.float32)
        out = nf.instance_norm(x, np.ones(1), np.zeros(1))
        assert np.abs(out).max() < 1e-6

    def test_two_sample_channel(self):
        x = np.array([[[-1.0, 1.0]]], dtype=np.float32)
        out = nf.instance_norm(x, np.ones(1), np.zeros(1))
        expected = 1.0 / np.sqrt(1.0 + 1e-5)
        assert abs(out[0, 0, 1] - expected) < 1e-6
        assert abs(out[0, 0, 0] + expected) < 1e-6

    def test_normalization_statistics(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((3, 16, 16)).astype(np.float32) * 3 + 1
        out = nf.instance_norm(x, np.ones(3), np.zeros(3))
        assert np.abs(out.mean(axis=(1, 2))).max() < 1e-6
        assert np.abs(out.var(axis=(1, 2)) - 1.0).max() < 1e-4

    def test_shift_invariance(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((2, 8, 8)).astype(np.float32)
        g = np.array([1.5, 0.5])
        b = np.array([0.1, -0.2])
        a = nf.instance_norm(x, g, b)
        c = nf.instance_norm(x + 2.5, g, b)
        assert np.abs(a - c).max() < 1e-5


class TestActivations:
    def test_softshrink_values(self):
        x = np.array([[[1.0, -0.2, 0.0]]], dtype=np.float32)
        out = nf.softshrink(x, np.array([0.3]))
        assert np.allclose(out[0, 0], [0.7, 0.0, 0.0], atol=1e-7)

    def test_softshrink_zero_threshold_identity(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal((2, 5, 5)).astype(np.float32)
        assert np.array_equal(nf.softshrink(x, np.zeros(2)), x)

    def test_softshrink_contractive_no_sign_flip(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal((3, 6, 6)).astype(np.float32)
        lam = rng.random(3).astype(np.float32)
        out = nf.softshrink(x, lam)
        assert (np.abs(out) <= np.abs(x) + 1e-7).all()
        assert (out * x >= -1e-7).all()

    def test_relu(self):
        x = np.array([[[-1.0, 2.0]]], dtype=np.float32)
        out = nf.relu(x)
        assert np.allclose(out[0, 0], [0.0, 2.0])
        assert np.array_equal(nf.relu(out), out)


class TestUpsample:
    def test_single_value(self):
        out = nf.upsample_nearest2x(np.full((1, 1, 1), 5.0, dtype=np.float32))
        assert out.shape == (1, 2, 2)
        assert (out == 5.0).all()

    def test_shape(self):
        assert nf.upsample_nearest2x(np.zeros((3, 8, 8))).shape == (3, 16, 16)

    def test_mean_downsample_inverts(self):
        rng = np.random.default_rng(6)
        x = rng.random((2, 4, 4)).astype(np.float32)
        up = nf.upsample_nearest2x(x)
        down = up.reshape(2, 4, 2, 4, 2).mean(axis=(2, 4))
        assert np.array_equal(down, x)


class TestResnetBlock:
    def test_zero_weights_identity(self):
        w = nf.random_weights(SMALL_ARCH, seed=0)
        c = SMALL_ARCH.bottleneck_channels
        for j in (1, 2):
            w.tensors[f"res.0.conv{j}.weight"][:] = 0
            w.tensors[f"res.0.conv{j}.bias"][:] = 0
            w.tensors[f"res.0.norm{j}.beta"][:] = 0
        x = np.random.default_rng(7).standard_normal((c, 8, 8)) \
            .astype(np.float32)
        out = nf.resnet_block(x, w, 0)
        assert np.abs(out - x).max() < 1e-6

    def test_residual_decomposition(self):
        w = nf.random_weights(SMALL_ARCH, seed=1)
        c = SMALL_ARCH.bottleneck_channels
        x = np.random.default_rng(8).standard_normal((c, 8, 8)) \
            .astype(np.float32)
        out = nf.resnet_block(x, w, 1)
        # compose the primitives independently
        h = nf.conv2d(x, w["res.1.conv1.weight"], w["res.1.conv1.bias"],
                      stride=1, pad=1)
        h = nf.instance_norm(h, w["res.1.norm1.gamma"], w["res.1.norm1.beta"])
        h = nf.relu(h)
        h = nf.conv2d(h, w["res.1.conv2.weight"], w["res.1.conv2.bias"],
                      stride=1, pad=1)
        h = nf.instance_norm(h, w["res.1.norm2.gamma"], w["res.1.norm2.beta"])
        assert np.abs(out - (x + h)).max() < 1e-5


class TestGeneratorForward:
    @pytest.mark.parametrize("n", [8, 16, 32, 64])
    def test_shape_preserved(self, n):
        w = nf.random_weights(SMALL_ARCH, seed=2)
        x = np.random.default_rng(n).uniform(-1, 1, (6, n, n)) \
            .astype(np.float32)
        out = nf.generator_forward(x, w)
        assert out.shape == (6, n, n)

    def test_output_bounded_and_finite(self):
        for seed in range(8):
            w = nf.random_weights(SMALL_ARCH, seed=seed)
            x = np.random.default_rng(seed).uniform(-1, 1, (6, 16, 16)) \
                .astype(np.float32)
            out = nf.generator_forward(x, w)
            assert np.isfinite(out).all()
            assert (np.abs(out) < 1.0).all()

    def test_indivisible_size_rejected(self):
        w = nf.random_weights(SMALL_ARCH, seed=0)
        with pytest.raises(ValueError, match="divisible"):
            nf.generator_forward(np.zeros((6, 12, 12), dtype=np.float32), w)

    def test_wrong_channels_rejected(self):
        w = nf.random_weights(SMALL_ARCH, seed=0)
        with pytest.raises(ValueError, match="channels"):
            nf.generator_forward(np.zeros((3, 16, 16), dtype=np.float32), w)


class TestEnhanceFrame:
    def test_output_dimensions(self):
        from lowlight.patchwork import PatchConfig
        w = nf.random_weights(SMALL_ARCH, seed=3)
        frame = np.random.default_rng(9).random((3, 20, 28)) \
            .astype(np.float32)
        out = nf.enhance_frame(frame, w, PatchConfig(8, 16))
        assert out.shape == frame.shape
        assert out.min() >= 0.0 and out.max() <= 1.0

    def test_parallel_matches_serial(self):
        from lowlight.patchwork import PatchConfig
        w = nf.random_weights(SMALL_ARCH, seed=4)
        frame = np.random.default_rng(10).random((3, 24, 24)) \
            .astype(np.float32)
        a = nf.enhance_frame(frame, w, PatchConfig(8, 16), jobs=1)
        b = nf.enhance_frame(frame, w, PatchConfig(8, 16), jobs=4)
        assert np.array_equal(a, b)
