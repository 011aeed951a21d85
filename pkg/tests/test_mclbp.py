import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import texture
from texfuse.lbp import LbpConfig
from texfuse.mclbp import (build_groups_co, build_groups_single, colbp_uu, entropies, joint_lbp_histogram,
                           mclbp_feature, mutual_information, pool, pool_dft, pool_moment, pool_sum,
                           rotate_uniform_index)

CO_GROUPS = 443  # frozen from the brute-force orbit count below


# ---------------------------------------------------------------- oracle

def _my_uniform_index(P=8):
    """Raw code -> uniform index, built from bit transitions directly."""
    def transitions(c):
        bits = [(c >> i) & 1 for i in range(P)]
        return sum(bits[i] != bits[(i + 1) % P] for i in range(P))
    uni = sorted(c for c in range(1 << P) if transitions(c) <= 2)
    pos = {c: i for i, c in enumerate(uni)}
    return [pos.get(c, len(uni)) for c in range(1 << P)]


def _rot(c, k, P=8):
    k %= P
    return ((c << k) | (c >> (P - k))) & ((1 << P) - 1)


def brute_force_co_orbits(P=8):
    """Connect co-pattern bins reached by rotating every raw code pair together."""
    u = _my_uniform_index(P)
    nb = max(u) + 1
    parent = list(range(nb * nb))

    def find(i):
        while parent[i] != i:
            i = parent[i]
        return i

    for a in range(1 << P):
        for b in range(1 << P):
            base = u[a] * nb + u[b]
            for k in range(1, P):
                other = u[_rot(a, k)] * nb + u[_rot(b, k)]
                ra, rb = find(base), find(other)
                if ra != rb:
                    parent[ra] = rb
    comps = {}
    for i in range(nb * nb):
        comps.setdefault(find(i), set()).add(i)
    return sorted(sorted(c) for c in comps.values())


# ---------------------------------------------------------------- partitions

def test_co_partition_matches_brute_force():
    oracle = brute_force_co_orbits()
    part = build_groups_co(8)
    assert len(oracle) == CO_GROUPS
    assert part.n_groups == CO_GROUPS
    assert sorted(sorted(g) for g in part.groups) == oracle


def test_co_partition_examples():
    part = build_groups_co(8)
    assert part.pattern_space_size == 3481
    zero = 0  # uniform index 0 is the all-zeros code
    assert len(part.groups[part.group_of[zero * 59 + zero]]) == 1
    one_bit = 1  # code 0b1 is the second uniform code
    assert len(part.groups[part.group_of[one_bit * 59 + zero]]) == 8
    assert sum(part.sizes) == 3481
    assert sorted(i for g in part.groups for i in g) == list(range(3481))


def test_single_partition():
    part = build_groups_single(8)
    assert part.n_groups == 10
    assert sorted(part.sizes) == [1, 1, 1] + [8] * 7
    assert len(part.groups[part.group_of[0]]) == 1
    assert len(part.groups[part.group_of[58]]) == 1
    assert sorted(i for g in part.groups for i in g) == list(range(59))
    for P in (4, 16):
        p = build_groups_single(P)
        assert sum(p.sizes) == P * (P - 1) + 3


@pytest.mark.parametrize("part", [build_groups_single(8), build_groups_co(8)], ids=["single", "co"])
def test_members_follow_rotation_order(part):
    perm = rotate_uniform_index(8)
    nb = 59
    for g in part.groups:
        for j, m in enumerate(g):
            nxt = g[(j + 1) % len(g)]
            if part.pattern_space_size == nb:
                assert perm[m] == nxt
            else:
                assert perm[m // nb] * nb + perm[m % nb] == nxt
        assert g[0] == min(g)


def test_pooled_dims():
    part = build_groups_co(8)
    assert part.pooled_dim("sum") == 443
    assert part.pooled_dim("moment") == 886
    assert part.pooled_dim("dft") == sum(n // 2 + 1 for n in part.sizes)
    with pytest.raises(ValueError):
        part.pooled_dim("max")


# ---------------------------------------------------------------- pooling

def _shift_groups(h, part, shifts):
    out = h.copy()
    for g, s in zip(part.groups, shifts):
        out[list(g)] = np.roll(h[list(g)], s)
    return out


@given(st.integers(0, 2**32 - 1))
def test_pooling_invariant_to_group_shifts(seed):
    rng = np.random.default_rng(seed)
    part = build_groups_co(8)
    h = rng.random(3481)
    h /= h.sum()
    hs = _shift_groups(h, part, rng.integers(0, 8, part.n_groups))
    assert np.array_equal(pool_sum(h, part), pool_sum(hs, part))
    np.testing.assert_allclose(pool_moment(h, part, 0.7), pool_moment(hs, part, 0.7), rtol=0, atol=1e-15)
    np.testing.assert_allclose(pool_dft(h, part), pool_dft(hs, part), rtol=0, atol=1e-12)


def test_pool_sum_examples(rng):
    part = build_groups_co(8)
    h = rng.random(3481)
    h /= h.sum()
    assert pool_sum(h, part).sum() == pytest.approx(1, abs=1e-12)
    single = build_groups_single(8)
    flat = np.zeros(59)
    flat[57] = 1  # all-ones code is the last uniform code
    f = pool_sum(flat, single)
    assert f[single.group_of[57]] == 1 and f.sum() == 1


def test_pool_moment_examples():
    part = build_groups_single(8)
    g = next(g for g in part.groups if len(g) == 8)
    h = np.zeros(59)
    h[list(g)] = 0.05
    gi = part.group_of[g[0]]
    out = pool_moment(h, part)
    assert out[2 * gi] == pytest.approx(0.4) and out[2 * gi + 1] == 0.0
    p, N, s1 = 0.3, 8, 1.7
    h = np.zeros(59)
    h[g[3]] = p
    out = pool_moment(h, part, s1)
    assert out[2 * gi] == p
    assert out[2 * gi + 1] == pytest.approx(s1 * ((p - p / N) ** 2 + (p / N) ** 2 * (N - 1)), rel=1e-14)
    with pytest.raises(ValueError):
        pool_moment(h, part, 0.0)


def test_pool_dft_examples(rng):
    part = build_groups_co(8)
    h = rng.random(3481)
    h /= h.sum()
    d, s = pool_dft(h, part), pool_sum(h, part)
    starts = np.cumsum([0] + [n // 2 + 1 for n in part.sizes[:-1]])
    np.testing.assert_allclose(d[starts], s, rtol=0, atol=1e-12)
    single = build_groups_single(8)
    g = next(g for g in single.groups if len(g) == 8)
    delta = np.zeros(59)
    delta[g[5]] = 0.25
    k = single.group_of[g[0]]
    st0 = sum(n // 2 + 1 for n in single.sizes[:k])
    np.testing.assert_allclose(pool_dft(delta, single)[st0:st0 + 5], 0.25, rtol=1e-14)


def test_pool_errors():
    part = build_groups_co(8)
    for fn in (pool_sum, pool_moment, pool_dft):
        with pytest.raises(ValueError):
            fn(np.ones(100), part)
    with pytest.raises(ValueError):
        pool(np.ones(3481), part, "max")


# ---------------------------------------------------------------- histograms and features

def test_colbp_uu_shape_and_constant():
    h = colbp_uu(texture("noise", 32))
    assert h.shape == (3481,) and h.sum() == pytest.approx(1)
    c = colbp_uu(np.full((16, 16), 7.0))
    assert c[57 * 59 + 57] == 1.0
    with pytest.raises(ValueError):
        colbp_uu(np.zeros((4, 4)))


def test_center_split():
    img = texture("blobs", 40)
    h = colbp_uu(img, center_split=True)
    assert h.shape == (6962,) and h.sum() == pytest.approx(1)
    np.testing.assert_allclose(h[:3481] + h[3481:], colbp_uu(img), atol=1e-15)
    assert mclbp_feature(img, "sum", center_split=True).shape == (886,)


@pytest.mark.parametrize("pooling", ["sum", "moment", "dft"])
def test_feature_invariant_to_quarter_turns(pooling):
    img = texture("noise", 48, seed=2)
    ref = mclbp_feature(img, pooling)
    assert ref.shape == (build_groups_co(8).pooled_dim(pooling),)
    for k in (1, 2, 3):
        np.testing.assert_allclose(mclbp_feature(np.rot90(img, k).copy(), pooling), ref, rtol=0, atol=1e-12)


def test_unpooled_histogram_is_not_rotation_invariant():
    img = texture("grating", 48, seed=1)
    assert not np.allclose(colbp_uu(img), colbp_uu(np.rot90(img).copy()))


# ---------------------------------------------------------------- scale correlation

def test_mutual_information_examples(rng):
    px, py = rng.random(5), rng.random(7)
    indep = np.outer(px / px.sum(), py / py.sum())
    assert abs(mutual_information(indep)) < 1e-10
    ident = np.eye(6) / 6
    assert mutual_information(ident) == pytest.approx(math.log2(6), abs=1e-12)
    with pytest.raises(ValueError):
        mutual_information(-ident)


@given(st.integers(0, 2**32 - 1))
def test_mutual_information_bounds(seed):
    J = np.random.default_rng(seed).random((5, 4)) ** 3
    hx, hy, _ = entropies(J)
    mi = mutual_information(J)
    assert -1e-12 <= mi <= min(hx, hy) + 1e-12


def test_scales_are_correlated():
    J = joint_lbp_histogram(texture("noise", 64), LbpConfig(8, 1), LbpConfig(8, 2), "uniform")
    assert J.shape == (59, 59)
    assert mutual_information(J) > 0.3
