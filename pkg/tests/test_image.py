import math

import numpy as np
import pytest
from PIL import Image as PILImage

from blindsr.image import as_image, bicubic_resize, load_image, modcrop, rgb_to_y, save_image


def _cubic_weight(t, a=-0.5):
    t = abs(t)
    if t <= 1.0:
        return (a + 2) * t**3 - (a + 3) * t**2 + 1
    if t < 2.0:
        return a * t**3 - 5 * a * t**2 + 8 * a * t - 4 * a
    return 0.0


def bicubic_oracle(img, scale):
    """Direct evaluation of the cubic kernel at every output site."""
    c, h, w = img.shape
    h_out = int(math.floor(h * scale + 0.5))
    w_out = int(math.floor(w * scale + 0.5))
    out = np.zeros((c, h_out, w_out))
    for ch in range(c):
        for i in range(h_out):
            sy = (i + 0.5) / scale - 0.5
            fy = math.floor(sy)
            for j in range(w_out):
                sx = (j + 0.5) / scale - 0.5
                fx = math.floor(sx)
                acc = 0.0
                for a in range(fy - 1, fy + 3):
                    for b in range(fx - 1, fx + 3):
                        wgt = _cubic_weight(sy - a) * _cubic_weight(sx - b)
                        acc += wgt * img[ch, min(max(a, 0), h - 1), min(max(b, 0), w - 1)]
                out[ch, i, j] = acc
    return out


class TestLoadSave:
    def test_8bit_gray_scaling(self, tmp_path):
        codes = np.array([[0, 255], [128, 64]], dtype=np.uint8)
        path = str(tmp_path / "g.png")
        PILImage.fromarray(codes, mode="L").save(path)
        img = load_image(path)
        assert img.shape == (1, 2, 2)
        np.testing.assert_allclose(img[0], codes / 255.0)

    def test_rgb_all_white(self, tmp_path):
        codes = np.full((3, 4, 3), 255, dtype=np.uint8)
        path = str(tmp_path / "w.png")
        PILImage.fromarray(codes, mode="RGB").save(path)
        img = load_image(path)
        assert img.shape == (3, 3, 4)
        assert np.all(img == 1.0)

    def test_16bit_gray(self, tmp_path):
        codes = np.array([[0, 65535], [32768, 1]], dtype=np.uint16)
        path = str(tmp_path / "g16.png")
        PILImage.fromarray(codes).save(path)
        img = load_image(path)
        np.testing.assert_allclose(img[0], codes / 65535.0)

    def test_roundtrip_bit_identical(self, tmp_path):
        gen = np.random.default_rng(0)
        codes = gen.integers(0, 256, size=(9, 7), dtype=np.uint8)
        p1, p2 = str(tmp_path / "a.png"), str(tmp_path / "b.png")
        PILImage.fromarray(codes, mode="L").save(p1)
        save_image(load_image(p1), p2)
        np.testing.assert_array_equal(np.asarray(PILImage.open(p2)), codes)

    def test_save_load_save_idempotent(self, tmp_path):
        gen = np.random.default_rng(1)
        img = gen.random((3, 8, 8))
        p1, p2 = str(tmp_path / "a.png"), str(tmp_path / "b.png")
        save_image(img, p1)
        save_image(load_image(p1), p2)
        assert (tmp_path / "a.png").read_bytes() == (tmp_path / "b.png").read_bytes()

    @pytest.mark.parametrize(
        "value,code", [(1.0, 255), (-0.2, 0), (0.5, 128), (0.0, 0), (1.7, 255)]
    )
    def test_quantization_rule(self, tmp_path, value, code):
        path = str(tmp_path / "q.png")
        save_image(np.full((1, 1, 1), value), path)
        assert np.asarray(PILImage.open(path))[0, 0] == code

    def test_text_format_roundtrip(self, tmp_path):
        gen = np.random.default_rng(2)
        img = gen.random((3, 5, 4))
        path = str(tmp_path / "m.txt")
        save_image(img, path)
        header = open(path).readline().split()
        assert header == ["5", "4", "3"]
        np.testing.assert_allclose(load_image(path), img, atol=1e-15)

    def test_unreadable_file_error(self, tmp_path):
        bad = tmp_path / "nope.png"
        bad.write_bytes(b"not a png")
        with pytest.raises(IOError, match="nope.png"):
            load_image(str(bad))

    def test_missing_file_error(self):
        with pytest.raises(IOError, match="missing.png"):
            load_image("missing.png")


class TestRgbToY:
    def test_white_maps_to_luma_max(self):
        img = np.ones((3, 2, 2))
        np.testing.assert_allclose(rgb_to_y(img), 235.0 / 255.0)

    def test_black_offset(self):
        np.testing.assert_allclose(rgb_to_y(np.zeros((3, 2, 2))), 16.0 / 255.0)

    def test_pure_red(self):
        img = np.zeros((3, 1, 1))
        img[0] = 1.0
        np.testing.assert_allclose(rgb_to_y(img)[0, 0, 0], (16.0 + 65.481) / 255.0)

    def test_range_invariant(self):
        gen = np.random.default_rng(3)
        y = rgb_to_y(gen.random((3, 16, 16)))
        assert np.all(y >= 16.0 / 255.0 - 1e-12) and np.all(y <= 235.0 / 255.0 + 1e-12)

    def test_wrong_channel_count(self):
        with pytest.raises(ValueError, match="3-channel"):
            rgb_to_y(np.zeros((1, 2, 2)))


class TestBicubic:
    def test_constant_partition_of_unity(self):
        img = np.full((1, 5, 7), 0.37)
        for scale in (0.5, 1.5, 2.0, 3.0):
            out = bicubic_resize(img, scale)
            assert np.abs(out - 0.37).max() < 1e-12

    def test_identity_at_scale_one(self):
        gen = np.random.default_rng(4)
        img = gen.random((3, 6, 5))
        np.testing.assert_allclose(bicubic_resize(img, 1.0), img, atol=1e-12)

    def test_matches_bruteforce_oracle_on_ramp(self):
        ramp = (np.arange(16, dtype=np.float64).reshape(1, 4, 4)) / 15.0
        np.testing.assert_allclose(bicubic_resize(ramp, 2.0), bicubic_oracle(ramp, 2.0), atol=1e-13)

    def test_matches_oracle_random_scales(self):
        gen = np.random.default_rng(5)
        img = gen.random((1, 5, 6))
        for scale in (0.5, 1.3, 2.0):
            np.testing.assert_allclose(
                bicubic_resize(img, scale), bicubic_oracle(img, scale), atol=1e-13
            )

    def test_output_dims_rounding(self):
        img = np.zeros((1, 3, 3))
        assert bicubic_resize(img, 1.5).shape == (1, 5, 5)  # round(4.5) away from zero

    def test_zero_output_error(self):
        with pytest.raises(ValueError):
            bicubic_resize(np.zeros((1, 2, 2)), 0.1)


class TestModcrop:
    @pytest.mark.parametrize(
        "dims,s,expected", [((7, 9), 4, (4, 8)), ((8, 8), 2, (8, 8)), ((21, 13), 3, (21, 12))]
    )
    def test_floor_to_multiple(self, dims, s, expected):
        img = np.zeros((1,) + dims)
        assert modcrop(img, s).shape[1:] == expected

    def test_crop_keeps_top_left(self):
        gen = np.random.default_rng(6)
        img = gen.random((1, 7, 7))
        np.testing.assert_array_equal(modcrop(img, 3), img[:, :6, :6])

    def test_too_small_error(self):
        with pytest.raises(ValueError):
            modcrop(np.zeros((1, 3, 10)), 4)


def test_as_image_rejects_bad_shapes():
    with pytest.raises(ValueError):
        as_image(np.zeros((2, 4, 4)))
    with pytest.raises(ValueError):
        as_image(np.zeros(5))
