import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from conftest import texture
from texfuse.lbp import (LbpConfig, code_space_size, full_code_map, lbp_code, lbp_code_map, lbp_histogram,
                         min_rotation_index, pattern_table, popcount, ri_code, riu2_code, ror, uniform_index,
                         uniform_index_with_start, uniformity)

b = lambda s: int(s, 2)  # noqa: E731
codes8 = st.integers(0, 255)


def transitions_oracle(code, P=8):
    bits = [(code >> k) & 1 for k in range(P)]
    return sum(bits[k] != bits[(k + 1) % P] for k in range(P))


def test_uniformity_examples():
    assert uniformity(b("11000000")) == 2
    assert uniformity(b("10000001")) == 2
    assert uniformity(b("10101100")) == 6
    assert uniformity(0) == 0 and uniformity(255) == 0


def test_uniformity_matches_enumeration():
    for c in range(256):
        assert uniformity(c) == transitions_oracle(c)


def test_uniform_index_table():
    t = pattern_table(8)
    assert t.uniform_count == 58 and t.n_bins == 59
    assert uniform_index(0) == 0
    assert uniform_index(b("10101100")) == 58
    idx = [uniform_index(c) for c in range(256)]
    assert len({i for i in idx if i != 58}) == 58
    for c in range(256):
        if transitions_oracle(c) == 4:
            assert uniform_index(c) == 58
    # brute force: ascending order of all codes with <= 2 transitions
    uni = [c for c in range(256) if transitions_oracle(c) <= 2]
    assert list(t.uniform_codes) == uni


def test_uniform_index_with_start():
    c = b("00001000")
    assert uniform_index_with_start(c, 8, 0) == uniform_index(c)
    assert uniform_index_with_start(c, 8, 3) != uniform_index_with_start(c, 8, 0)
    assert uniformity(ror(c, 3, 8)) == uniformity(c)
    with pytest.raises(ValueError):
        uniform_index_with_start(c, 8, 8)


@given(codes8, st.integers(0, 7))
def test_start_cancels_rotation(c, j):
    # rotating left by j and reading from bit j gives the original string
    rotated = ror(c, -j, 8)
    assert uniform_index_with_start(rotated, 8, j) == uniform_index_with_start(c, 8, 0)


def test_ri_and_riu2_examples():
    assert ri_code(b("10000000")) == 1
    assert ri_code(255) == 255
    assert len({riu2_code(c) for c in range(256)}) == 10
    assert riu2_code(0) == 0 and riu2_code(255) == 8
    assert riu2_code(b("10101100")) == 9


@given(codes8, st.integers(0, 7))
def test_rotation_invariance_of_codes(c, k):
    assert riu2_code(ror(c, k, 8)) == riu2_code(c)
    assert ri_code(ror(c, k, 8)) == ri_code(c)


@given(codes8)
def test_min_rotation_index_contract(c):
    k = min_rotation_index(c)
    assert ror(c, k, 8) == ri_code(c)
    assert all(ror(c, j, 8) > ri_code(c) for j in range(k))


def test_min_rotation_examples():
    assert min_rotation_index(255) == 0
    assert min_rotation_index(b("00000001")) == 0
    assert min_rotation_index(b("00000010")) == 1


def test_vectorised_matches_scalar():
    cs = np.arange(256)
    assert np.array_equal(riu2_code(cs), [riu2_code(int(c)) for c in cs])
    assert np.array_equal(popcount(cs, 8), [bin(c).count("1") for c in cs])


def test_uniform_group_sizes_sum_to_58():
    by_pop = {}
    for c in pattern_table(8).uniform_codes:
        by_pop.setdefault(bin(int(c)).count("1"), []).append(c)
    assert sorted(len(v) for v in by_pop.values()) == [1, 1, 8, 8, 8, 8, 8, 8, 8]


def test_lbp_code_examples():
    assert lbp_code(np.full((5, 5), 7.0), 2, 2) == 255
    a = np.full((5, 5), 10.0)
    a[2, 2] = 50
    assert lbp_code(a, 2, 2) == 0
    edge = np.zeros((8, 8))
    edge[:, 4:] = 255
    code = lbp_code(edge, 4, 4)
    zero_bits = [k for k in range(8) if not (code >> k) & 1]
    assert zero_bits == [3, 4, 5]  # neighbours at 135, 180 and 225 degrees


def test_lbp_code_out_of_bounds():
    with pytest.raises(IndexError):
        lbp_code(np.zeros((5, 5)), 0, 2)


@pytest.mark.parametrize("P,R", [(8, 1.0), (8, 2.0), (16, 2.0), (4, 1.0), (8, 1.5)])
def test_code_map_matches_pointwise(P, R):
    a = np.random.default_rng(3).integers(0, 256, (11, 12)).astype(float)
    cfg = LbpConfig(P, R)
    m = cfg.margin
    cmap = lbp_code_map(a, cfg)
    for yy in range(cmap.shape[0]):
        for xx in range(cmap.shape[1]):
            assert cmap[yy, xx] == lbp_code(a, xx + m, yy + m, cfg)


def test_full_code_map_marks_border():
    f = full_code_map(np.zeros((6, 7)))
    assert f.shape == (6, 7)
    assert np.all(f[0] == -1) and np.all(f[:, -1] == -1)
    assert np.all(f[1:-1, 1:-1] == 255)


def test_histograms():
    h = lbp_histogram(np.full((10, 10), 3.0), variant="riu2")
    assert h.shape == (10,) and h[8] == 1.0
    a = texture("noise")
    for v in ("raw", "uniform", "ri", "riu2"):
        h = lbp_histogram(a, variant=v)
        assert h.shape == (code_space_size(8, v),)
        assert abs(h.sum() - 1) < 1e-12


@pytest.mark.parametrize("kind", ["noise", "grating", "checker", "blobs"])
def test_riu2_rot90(kind):
    a = texture(kind)
    d = np.abs(lbp_histogram(a) - lbp_histogram(np.rot90(a))).sum()
    assert d <= 0.02


def test_config_validation():
    with pytest.raises(ValueError):
        LbpConfig(P=7)
    with pytest.raises(ValueError):
        LbpConfig(R=0)
    with pytest.raises(ValueError):
        lbp_code_map(np.zeros((2, 2)))


@given(arrays(np.float64, (7, 7), elements=st.floats(0, 255)), st.integers(-2, 3), st.integers(-100, 100))
def test_codes_invariant_to_gain_and_shift(a, e, offset):
    a = np.round(a)
    # power-of-two gain is exact under bilinear weights
    assert np.array_equal(lbp_code_map(a), lbp_code_map(a * 2.0 ** e))
    # integer shifts are exact where no interpolation happens
    cfg = LbpConfig(4, 1.0)
    assert np.array_equal(lbp_code_map(a, cfg), lbp_code_map(a + offset, cfg))
