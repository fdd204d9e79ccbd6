import os

import numpy as np
import pytest

from lowlight import imagecore as ic


def random_frame(rng, h, w):
    return rng.random((3, h, w)).astype(np.float32)


class TestPngIO:
    def test_8bit_scaling(self, tmp_path):
        # 2x1 image: red and blue pixels
        frame = np.zeros((3, 1, 2), dtype=np.float32)
        frame[0, 0, 0] = 1.0
        frame[2, 0, 1] = 1.0
        path = str(tmp_path / "px.png")
        ic.save_frame(frame, path, bit_depth=8)
        loaded = ic.load_frame(path, bit_depth=8)
        assert np.array_equal(loaded, frame)

    def test_16bit_full_scale(self, tmp_path):
        frame = np.ones((3, 2, 2), dtype=np.float32)
        path = str(tmp_path / "white.png")
        ic.save_frame(frame, path, bit_depth=16)
        assert np.array_equal(ic.load_frame(path, bit_depth=16), frame)

    @pytest.mark.parametrize("bit_depth", [8, 16])
    def test_round_trip_quantization_bound(self, tmp_path, bit_depth):
        rng = np.random.default_rng(7)
        frame = random_frame(rng, 8, 8)
        path = str(tmp_path / "rt.png")
        ic.save_frame(frame, path, bit_depth=bit_depth)
        loaded = ic.load_frame(path, bit_depth=bit_depth)
        step = 1.0 / (2 ** bit_depth - 1)
        assert np.abs(loaded - frame).max() <= step

    def test_zeros_round_trip(self, tmp_path):
        frame = np.zeros((3, 4, 4), dtype=np.float32)
        path = str(tmp_path / "zero.png")
        ic.save_frame(frame, path, bit_depth=8)
        assert ic.load_frame(path, 8).max() == 0.0

    def test_missing_file(self, tmp_path):
        with pytest.raises(ic.ImageIOError, match="missing"):
            ic.load_frame(str(tmp_path / "nope.png"), 8)

    def test_truncated_file_names_path(self, tmp_path):
        path = str(tmp_path / "trunc.png")
        frame = np.full((3, 16, 16), 0.5, dtype=np.float32)
        ic.save_frame(frame, path, 8)
        with open(path, "r+b") as f:
            f.truncate(20)
        with pytest.raises(ic.ImageIOError, match="trunc.png"):
            ic.load_frame(path, 8)

    def test_wrong_bit_depth_rejected(self, tmp_path):
        path = str(tmp_path / "depth.png")
        ic.save_frame(np.zeros((3, 2, 2), dtype=np.float32), path, 8)
        with pytest.raises(ic.ImageIOError, match="16-bit"):
            ic.load_frame(path, 16)

    def test_unwritable_path(self):
        frame = np.zeros((3, 2, 2), dtype=np.float32)
        with pytest.raises(ic.ImageIOError):
            ic.save_frame(frame, "/nonexistent-dir/out.png", 8)

    def test_invalid_frame_rejected_on_save(self, tmp_path):
        bad = np.full((3, 2, 2), 1.5, dtype=np.float32)
        with pytest.raises(ValueError, match="outside"):
            ic.save_frame(bad, str(tmp_path / "bad.png"), 8)


class TestLlfr:
    def test_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(3)
        frame = random_frame(rng, 5, 9)
        path = str(tmp_path / "f.llfr")
        ic.save_frame_llfr(frame, path)
        assert np.array_equal(ic.load_frame_llfr(path), frame)

    def test_bad_magic(self, tmp_path):
        path = str(tmp_path / "bad.llfr")
        with open(path, "wb") as f:
            f.write(b"XXXX" + b"\0" * 20)
        with pytest.raises(ic.ImageIOError, match="magic"):
            ic.load_frame_llfr(path)

    def test_truncated(self, tmp_path):
        frame = random_frame(np.random.default_rng(1), 4, 4)
        path = str(tmp_path / "t.llfr")
        ic.save_frame_llfr(frame, path)
        with open(path, "r+b") as f:
            f.truncate(30)
        with pytest.raises(ic.ImageIOError, match="truncated"):
            ic.load_frame_llfr(path)


class TestResizeArea:
    def test_constant_preserved(self):
        x = np.full((3, 4, 4), 0.5, dtype=np.float32)
        out = ic.resize_area(x, 2, 2)
        assert np.allclose(out, 0.5, atol=1e-7)

    def test_two_row_average(self):
        x = np.array([[[0.0, 0.0], [1.0, 1.0]]], dtype=np.float32)
        out = ic.resize_area(x, 1, 1)
        assert out.shape == (1, 1, 1)
        assert abs(out[0, 0, 0] - 0.5) < 1e-7

    def test_mean_preserved_1000_to_360(self):
        rng = np.random.default_rng(11)
        x = rng.random((1, 1000, 1000)).astype(np.float32)
        out = ic.resize_area(x, 360, 360)
        assert abs(float(out.mean()) - float(x.mean(dtype=np.float64))) < 1e-6

    def test_linearity(self):
        rng = np.random.default_rng(5)
        x = rng.random((2, 37, 53)).astype(np.float32)
        y = rng.random((2, 37, 53)).astype(np.float32)
        a, b = 0.7, -0.3
        lhs = ic.resize_area(a * x + b * y, 13, 17)
        rhs = a * ic.resize_area(x, 13, 17) + b * ic.resize_area(y, 13, 17)
        assert np.abs(lhs - rhs).max() < 1e-6

    def test_upsampling_rejected(self):
        x = np.zeros((1, 4, 4), dtype=np.float32)
        with pytest.raises(ValueError):
            ic.resize_area(x, 8, 4)

    def test_zero_output_rejected(self):
        x = np.zeros((1, 4, 4), dtype=np.float32)
        with pytest.raises(ValueError):
            ic.resize_area(x, 0, 4)


class TestModelDomain:
    def test_endpoints(self):
        assert ic.to_model_domain(np.array([0.0]))[0] == -1.0
        assert ic.to_model_domain(np.array([1.0]))[0] == 1.0
        assert ic.from_model_domain(np.array([3.0]))[0] == 1.0
        assert ic.from_model_domain(np.array([-5.0]))[0] == 0.0

    def test_round_trip(self):
        rng = np.random.default_rng(2)
        x = rng.random((3, 10, 10)).astype(np.float32)
        back = ic.from_model_domain(ic.to_model_domain(x))
        assert np.abs(back - x).max() < 1e-7


class TestSequenceSpec:
    def test_paths(self):
        seq = ic.SequenceSpec("d/in_%06d.png", start=3, count=2)
        assert seq.path(3) == "d/in_000003.png"
        assert list(seq.indices()) == [3, 4]
        with pytest.raises(IndexError):
            seq.path(5)
