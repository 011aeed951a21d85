"""Multi-scale co-occurrence of uniform LBPs with rotation-invariant pooling.

A one-step image rotation (360/P degrees) rotates every code left by one
bit. Uniform patterns, and pairs of them, fall into orbits under that
action; pooling any statistic that ignores a circular shift of an orbit's
members gives a globally rotation-invariant feature. Non-uniform codes share
one bucket index, which is treated as a fixed point of the rotation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .imgcore import as_gray
from .lbp import LbpConfig, code_space_size, lbp_code_map, map_codes, pattern_table, rol

POOLINGS = ("sum", "moment", "dft")


@dataclass(frozen=True, eq=False)
class GroupPartition:
    """Orbit decomposition of a pattern index space.

    ``groups[g]`` lists member indices in rotation order: one rotation step
    maps ``groups[g][j]`` to ``groups[g][(j + 1) % len]``.
    """

    pattern_space_size: int
    group_of: np.ndarray
    groups: tuple

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    @property
    def sizes(self) -> list[int]:
        return [len(g) for g in self.groups]

    def pooled_dim(self, pooling: str) -> int:
        if pooling == "sum":
            return self.n_groups
        if pooling == "moment":
            return 2 * self.n_groups
        if pooling == "dft":
            return sum(n // 2 + 1 for n in self.sizes)
        raise ValueError(f"unknown pooling {pooling!r}")


def rotate_uniform_index(P: int = 8) -> np.ndarray:
    """Index permutation induced by one rotation step (bucket stays put)."""
    table = pattern_table(P)
    codes = table.uniform_codes
    perm = np.empty(table.n_bins, dtype=np.int64)
    perm[:-1] = table.index(rol(codes, 1, P))
    perm[-1] = table.uniform_count
    return perm


def _orbits(step: np.ndarray) -> GroupPartition:
    """Orbits of the cyclic action ``i -> step[i]`` found by union-find."""
    n = step.shape[0]
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        ri, rj = find(i), find(int(step[i]))
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    roots = sorted({find(i) for i in range(n)})
    group_of = np.empty(n, dtype=np.int64)
    groups = []
    for g, root in enumerate(roots):
        # root is the smallest member because unions keep the smaller index
        members = [root]
        nxt = int(step[root])
        while nxt != root:
            members.append(nxt)
            nxt = int(step[nxt])
        group_of[members] = g
        groups.append(tuple(members))
    group_of.setflags(write=False)
    return GroupPartition(n, group_of, tuple(groups))


@lru_cache(maxsize=None)
def build_groups_single(P: int = 8) -> GroupPartition:
    """Rotation orbits of the uniform patterns plus the non-uniform bucket."""
    return _orbits(rotate_uniform_index(P))


@lru_cache(maxsize=None)
def build_groups_co(P: int = 8) -> GroupPartition:
    """Orbits of uniform co-patterns ``(u1, u2)`` under simultaneous rotation.

    Co-pattern index is ``u1 * n_bins + u2``.
    """
    if P != 8:
        raise ValueError("co-occurrence groups are defined for P = 8")
    perm = rotate_uniform_index(P)
    nb = perm.shape[0]
    idx = np.arange(nb * nb)
    step = perm[idx // nb] * nb + perm[idx % nb]
    return _orbits(step)


# --------------------------------------------------------------------------
# Histograms
# --------------------------------------------------------------------------


def colbp_uu(img, s1: LbpConfig = LbpConfig(8, 1), s2: LbpConfig = LbpConfig(8, 2),
             center_split: bool = False) -> np.ndarray:
    """Joint histogram of uniform indices at two radii (start bit 0 for both).

    Both scales share the centre grid of the larger radius. With
    ``center_split`` the centres are divided by whether their value reaches
    the image mean, doubling the length; the result is normalised jointly.
    """
    a = as_gray(img).data
    m = max(s1.margin, s2.margin)
    c1 = lbp_code_map(a, s1, margin=m)
    c2 = lbp_code_map(a, s2, margin=m)
    n1 = pattern_table(s1.P).n_bins
    n2 = pattern_table(s2.P).n_bins
    bins = map_codes(c1, s1.P, "uniform") * n2 + map_codes(c2, s2.P, "uniform")
    size = n1 * n2
    if center_split:
        centre = a[m:a.shape[0] - m, m:a.shape[1] - m]
        bins = bins + size * (centre >= a.mean())
        size *= 2
    hist = np.bincount(bins.ravel(), minlength=size).astype(np.float64)
    return hist / hist.sum()


def joint_lbp_histogram(img, s1: LbpConfig = LbpConfig(8, 1), s2: LbpConfig = LbpConfig(8, 2),
                        variant: str = "uniform") -> np.ndarray:
    """2-D joint distribution of two LBP variants on a shared centre grid."""
    a = as_gray(img).data
    m = max(s1.margin, s2.margin)
    c1 = map_codes(lbp_code_map(a, s1, margin=m), s1.P, variant).ravel()
    c2 = map_codes(lbp_code_map(a, s2, margin=m), s2.P, variant).ravel()
    n1, n2 = code_space_size(s1.P, variant), code_space_size(s2.P, variant)
    joint = np.bincount(c1 * n2 + c2, minlength=n1 * n2).astype(np.float64)
    return (joint / joint.sum()).reshape(n1, n2)


# --------------------------------------------------------------------------
# Pooling
# --------------------------------------------------------------------------


def _blocks(hist, partition: GroupPartition):
    h = np.asarray(hist, dtype=np.float64).ravel()
    n = partition.pattern_space_size
    if h.size == 0 or h.size % n:
        raise ValueError(f"histogram length {h.size} is not a multiple of {n}")
    return h.reshape(-1, n)


def pool_sum(hist, partition: GroupPartition) -> np.ndarray:
    """Total probability per group."""
    out = []
    for block in _blocks(hist, partition):
        out.extend(math.fsum(block[list(g)]) for g in partition.groups)
    return np.asarray(out)


def pool_moment(hist, partition: GroupPartition, sigma1: float = 1.0) -> np.ndarray:
    """Per group ``[m, sigma1 * sum_j (h_j - m / N)^2]`` with ``m`` the group total."""
    if not sigma1 > 0:
        raise ValueError("sigma1 must be positive")
    out = []
    for block in _blocks(hist, partition):
        for g in partition.groups:
            vals = block[list(g)]
            m = math.fsum(vals)
            dev = vals - m / len(g)
            out.append(m)
            out.append(sigma1 * math.fsum(dev * dev))
    return np.asarray(out)


def pool_dft(hist, partition: GroupPartition) -> np.ndarray:
    """DFT magnitudes ``M(0..N//2)`` of each group's rotation-ordered members."""
    out = []
    for block in _blocks(hist, partition):
        for g in partition.groups:
            spec = np.abs(np.fft.fft(block[list(g)]))
            out.append(spec[: len(g) // 2 + 1])
    return np.concatenate(out)


def pool(hist, partition: GroupPartition, pooling: str, sigma1: float = 1.0) -> np.ndarray:
    if pooling == "sum":
        return pool_sum(hist, partition)
    if pooling == "moment":
        return pool_moment(hist, partition, sigma1)
    if pooling == "dft":
        return pool_dft(hist, partition)
    raise ValueError(f"unknown pooling {pooling!r}; expected one of {POOLINGS}")


def mclbp_feature(img, pooling: str = "sum", s1: LbpConfig = LbpConfig(8, 1),
                  s2: LbpConfig = LbpConfig(8, 2), sigma1: float = 1.0,
                  center_split: bool = False) -> np.ndarray:
    hist = colbp_uu(img, s1, s2, center_split=center_split)
    return pool(hist, build_groups_co(s1.P), pooling, sigma1)


# --------------------------------------------------------------------------
# Scale correlation
# --------------------------------------------------------------------------


def _entropy_bits(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


def entropies(joint) -> tuple[float, float, float]:
    """``(H(X), H(Y), H(X, Y))`` in bits."""
    J = np.asarray(joint, dtype=np.float64)
    if J.ndim != 2:
        raise ValueError("joint histogram must be 2-D")
    if np.any(J < 0):
        raise ValueError("joint histogram has negative entries")
    total = J.sum()
    if not total > 0:
        raise ValueError("joint histogram is empty")
    J = J / total
    return _entropy_bits(J.sum(axis=1)), _entropy_bits(J.sum(axis=0)), _entropy_bits(J.ravel())


def mutual_information(joint) -> float:
    """``H(X) + H(Y) - H(X, Y)`` in bits, clipped at zero."""
    hx, hy, hxy = entropies(joint)
    return max(0.0, hx + hy - hxy)
