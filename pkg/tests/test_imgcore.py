import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from texfuse.imgcore import (ColorImage, GrayImage, ImageFormatError, extract_channel, gaussian_smooth,
                             load_image, log_enhance, resize_min_side, save_pgm, save_ppm, to_gray)


def test_pgm_decode(tmp_path):
    p = tmp_path / "a.pgm"
    p.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 128, 255, 64]))
    img = load_image(p)
    expect = np.array([[0, 128], [255, 64]], float)
    for plane in (img.red, img.green, img.blue):
        np.testing.assert_array_equal(plane, expect)


def test_ppm_decode_channels(tmp_path):
    p = tmp_path / "a.ppm"
    p.write_bytes(b"P6\n1 1\n255\n" + bytes([10, 200, 30]))
    img = load_image(p)
    assert extract_channel(img, "green").data[0, 0] == 200
    assert extract_channel(img, "red").data[0, 0] == 10
    assert extract_channel(img, "blue").data[0, 0] == 30


def test_pgm_with_comment_and_16bit(tmp_path):
    p = tmp_path / "b.pgm"
    p.write_bytes(b"P5\n# hi\n1 1\n65535\n" + bytes([0xFF, 0xFF]))
    assert load_image(p).green[0, 0] == pytest.approx(255.0)


@pytest.mark.parametrize("raw", [b"P5\n2 2\n255\n\x00\x01", b"P3\n1 1\n255\n1", b"P5\n0 2\n255\n", b"P5\n1 1\n70000\n\x00"])
def test_malformed(tmp_path, raw):
    p = tmp_path / "bad.pgm"
    p.write_bytes(raw)
    with pytest.raises(ImageFormatError):
        load_image(p)


def test_save_roundtrip(tmp_path):
    a = np.arange(12, dtype=float).reshape(3, 4) * 20
    save_pgm(a, tmp_path / "x.pgm")
    np.testing.assert_array_equal(load_image(tmp_path / "x.pgm").green, a)
    c = ColorImage(a, a[::-1], np.zeros_like(a))
    save_ppm(c, tmp_path / "x.ppm")
    back = load_image(tmp_path / "x.ppm")
    np.testing.assert_array_equal(back.green, a[::-1])


def test_gray_source_any_channel_identical():
    g = np.random.default_rng(0).uniform(0, 255, (5, 6))
    img = ColorImage.from_gray(g)
    outs = [extract_channel(img, c).data for c in ("red", "green", "blue")]
    assert all(np.array_equal(o, g) for o in outs)
    np.testing.assert_array_equal(to_gray(img).data, g)


def test_bad_channel():
    with pytest.raises(ValueError):
        extract_channel(ColorImage.from_gray(np.zeros((2, 2))), "alpha")


def test_gray_image_invariants():
    with pytest.raises(ValueError):
        GrayImage(np.full((2, 2), np.nan))
    with pytest.raises(ValueError):
        GrayImage(np.zeros((0, 3)))


def test_smooth_constant_and_mass():
    c = gaussian_smooth(np.full((9, 11), 100.0), 2.3).data
    assert np.abs(c - 100).max() < 1e-9
    imp = np.zeros((21, 21))
    imp[10, 10] = 1.0
    assert abs(gaussian_smooth(imp, 1.5).data.sum() - 1.0) < 1e-6


def test_smooth_reduces_noise_variance(rng):
    a = rng.normal(0, 1, (64, 64))
    assert gaussian_smooth(a, 1.5).data.var() < a.var()


@pytest.mark.parametrize("shape,expect", [((70, 70), (70, 70)), ((32, 40), (64, 80)), ((50, 60), (64, 77)), ((60, 50), (77, 64))])
def test_resize_min_side(shape, expect):
    out = resize_min_side(np.random.default_rng(0).uniform(0, 255, shape), 64)
    assert out.shape == expect


def test_resize_idempotent():
    a = np.random.default_rng(1).uniform(0, 255, (30, 45))
    once = resize_min_side(a, 64)
    np.testing.assert_array_equal(resize_min_side(once, 64).data, once.data)


def test_log_enhance_examples():
    assert np.all(log_enhance(np.full((3, 3), 7.0)).data == 0)
    np.testing.assert_allclose(log_enhance(np.array([[0.0, 255.0]])).data, [[0, 255]], atol=1e-12)
    out = log_enhance(np.array([[0.0, math.e - 1, 255.0]])).data[0]
    assert out[0] == 0 and out[2] == 255
    assert out[1] == pytest.approx(255 * 1 / math.log(256), abs=1e-9)
    assert out[1] == pytest.approx(46.0, abs=0.05)


@given(arrays(np.float64, (4, 5), elements=st.floats(0, 255)))
def test_log_enhance_range_and_monotone(a):
    out = log_enhance(a).data
    assert out.min() >= 0 and out.max() <= 255
    order = np.argsort(a.ravel(), kind="stable")
    assert np.all(np.diff(out.ravel()[order]) >= -1e-9)
