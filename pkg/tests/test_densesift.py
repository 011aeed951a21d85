import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from conftest import texture
from texfuse.densesift import (CLAMP, PatchGridConfig, extract_image_rootsifts, root_sift, sample_grid,
                               sift_descriptor)


def naive_sift(a, x0, y0, S):
    """Per-pixel trilinear voting straight from the definition."""
    dy, dx = np.gradient(a)
    raw = np.zeros((4, 4, 8))
    sigma = S / 2.0
    c = (S - 1) / 2.0
    for v in range(S):
        for u in range(S):
            gx, gy = dx[y0 + v, x0 + u], dy[y0 + v, x0 + u]
            m = math.hypot(gx, gy)
            if m == 0:
                continue
            w = math.exp(-0.5 * (((u - c) / sigma) ** 2 + ((v - c) / sigma) ** 2))
            th = math.atan2(gy, gx) % (2 * math.pi)
            po = th * 8 / (2 * math.pi)
            o0 = math.floor(po)
            fo = po - o0
            px = (u + 0.5) * 4 / S - 0.5
            py = (v + 0.5) * 4 / S - 0.5
            for by in range(4):
                wy = max(0.0, 1 - abs(py - by))
                for bx in range(4):
                    wx = max(0.0, 1 - abs(px - bx))
                    if wx * wy == 0:
                        continue
                    raw[by, bx, o0 % 8] += w * wx * wy * m * (1 - fo)
                    raw[by, bx, (o0 + 1) % 8] += w * wx * wy * m * fo
    d = raw.ravel()
    n = np.linalg.norm(d)
    if n == 0:
        return d
    d = np.minimum(d / n, 0.2)
    return d / np.linalg.norm(d)


def test_grid_counts():
    assert sample_grid(70, 70).shape == (225, 2)
    assert sample_grid(41, 41).shape == (1, 2)
    assert sample_grid(70, 80).shape == (300, 2)
    g = sample_grid(70, 80)
    assert g[:, 0].max() == 28 and g[:, 1].max() == 38


def test_grid_rejects_small_image():
    with pytest.raises(ValueError):
        sample_grid(40, 70)


def test_matches_naive_oracle():
    a = texture("blobs", 50, seed=3)
    for x, y in [(0, 0), (5, 3), (9, 9)]:
        np.testing.assert_allclose(sift_descriptor(a, (x, y), 41), naive_sift(a, x, y, 41), atol=1e-10)


def test_constant_patch_is_zero():
    assert not sift_descriptor(np.full((45, 45), 9.0), (0, 0)).any()


@pytest.mark.parametrize("kind", ["noise", "grating", "checker"])
def test_norm_and_clamp(kind):
    d = sift_descriptor(texture(kind, 48), (3, 4))
    assert abs(np.linalg.norm(d) - 1) < 1e-6
    assert d.min() >= 0 and d.max() <= CLAMP + 0.05


def rot90_permutation():
    perm = np.empty(128, dtype=np.int64)
    for by in range(4):
        for bx in range(4):
            for o in range(8):
                src = (by * 4 + bx) * 8 + o
                dst = ((3 - bx) * 4 + by) * 8 + (o - 2) % 8
                perm[dst] = src
    return perm


@pytest.mark.parametrize("kind", ["noise", "blobs", "grating"])
def test_rot90_is_bin_permutation(kind):
    a = texture(kind, 45, seed=7)
    S, x, y = 41, 2, 1
    d = sift_descriptor(a, (x, y), S)
    r = np.rot90(a)
    W = a.shape[1]
    # the patch's top-left in the rotated image
    d_rot = sift_descriptor(r, (y, W - x - S), S)
    err = np.linalg.norm(d_rot - d[rot90_permutation()])
    assert err <= 0.05
    # the grid and the bin boundaries are rotation-symmetric, so in practice it is exact
    assert err < 1e-9


def test_patch_outside_image():
    with pytest.raises(IndexError):
        sift_descriptor(np.zeros((40, 40)), (0, 0), 41)


def test_root_sift_examples():
    np.testing.assert_allclose(root_sift(np.full(128, 3.0)), np.full(128, 1 / math.sqrt(128)))
    assert not root_sift(np.zeros(128)).any()
    with pytest.raises(ValueError):
        root_sift(-np.ones(4))


@given(arrays(np.float64, 16, elements=st.floats(0, 10)), st.floats(1e-3, 1e3))
def test_root_sift_norm_and_scale(v, c):
    r = root_sift(v)
    if v.sum() > 0:
        assert abs(np.linalg.norm(r) - 1) < 1e-12
        np.testing.assert_allclose(root_sift(c * v), r, atol=1e-12)


def test_extract_counts():
    a = texture("noise", 70)
    ds = extract_image_rootsifts(a)
    assert ds.count <= 1350 and ds.dim == 128
    assert np.allclose(np.linalg.norm(ds.data, axis=1), 1)
    assert set(np.unique(ds.scales)) <= set(range(6))
    assert extract_image_rootsifts(np.full((70, 70), 5.0)).count == 0
    one = extract_image_rootsifts(texture("noise", 41), PatchGridConfig(41, 2, (1.5,), 41))
    assert one.count <= 1


def test_extract_resizes_small_images():
    ds = extract_image_rootsifts(texture("grating", 32))
    assert ds.count == 6 * 12 * 12
