"""Single-point local binary patterns.

Neighbour ``k`` sits at angle ``2*pi*k/P`` from the +x axis, i.e. at offset
``(R cos, R sin)`` in (column, row) coordinates, and sets bit ``k`` when its
bilinear sample is >= the centre value. ``ROR(c, k)`` moves bit ``k`` to
bit 0. All code-level helpers accept plain ints or integer arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import kernels
from .imgcore import as_gray

ALLOWED_P = (4, 8, 16, 24)
VARIANTS = ("raw", "uniform", "ri", "riu2")


@dataclass(frozen=True)
class LbpConfig:
    P: int = 8
    R: float = 1.0
    interpolation: str = "bilinear"

    def __post_init__(self):
        if self.P not in ALLOWED_P:
            raise ValueError(f"P must be one of {ALLOWED_P}, got {self.P}")
        if not self.R > 0:
            raise ValueError(f"R must be positive, got {self.R}")
        if self.interpolation != "bilinear":
            raise ValueError("only bilinear interpolation is supported")

    @property
    def margin(self) -> int:
        return int(math.ceil(self.R))


# --------------------------------------------------------------------------
# Code arithmetic
# --------------------------------------------------------------------------


def ror(code, k, P: int):
    """Circular right shift of a P-bit code by ``k`` places."""
    k = np.asarray(k) % P if not isinstance(k, int) else k % P
    mask = (1 << P) - 1
    return ((code >> k) | (code << (P - k))) & mask


def rol(code, k, P: int):
    return ror(code, -k if isinstance(k, int) else -np.asarray(k), P)


def popcount(code, P: int):
    c = np.asarray(code, dtype=np.int64)
    out = np.zeros_like(c)
    for k in range(P):
        out += (c >> k) & 1
    return int(out) if np.ndim(code) == 0 else out


def uniformity(code, P: int = 8):
    """Number of 0/1 transitions around the circular bit string."""
    c = np.asarray(code, dtype=np.int64)
    return popcount(c ^ ror(c, 1, P), P)


def ri_code(code, P: int = 8):
    """Minimum over all circular right shifts."""
    c = np.asarray(code, dtype=np.int64)
    best = c.copy()
    for k in range(1, P):
        best = np.minimum(best, ror(c, k, P))
    return int(best) if np.ndim(code) == 0 else best


def min_rotation_index(code, P: int = 8):
    """Smallest shift ``k`` with ``ROR(code, k) == ri_code(code)``."""
    c = np.asarray(code, dtype=np.int64)
    best = c.copy()
    arg = np.zeros_like(c)
    for k in range(1, P):
        r = ror(c, k, P)
        better = r < best
        best = np.where(better, r, best)
        arg = np.where(better, k, arg)
    return int(arg) if np.ndim(code) == 0 else arg


def riu2_code(code, P: int = 8):
    """Popcount for uniform codes, ``P + 1`` otherwise."""
    c = np.asarray(code, dtype=np.int64)
    out = np.where(uniformity(c, P) <= 2, popcount(c, P), P + 1)
    return int(out) if np.ndim(code) == 0 else out


@dataclass(frozen=True, eq=False)
class PatternIndexTable:
    """Maps raw codes to uniform indices; index ``uniform_count`` is the bucket."""

    P: int
    uniform_codes: np.ndarray  # ascending

    @property
    def uniform_count(self) -> int:
        return int(self.uniform_codes.shape[0])

    @property
    def n_bins(self) -> int:
        return self.uniform_count + 1

    def index(self, code):
        c = np.asarray(code, dtype=np.int64)
        pos = np.searchsorted(self.uniform_codes, c)
        clipped = np.minimum(pos, self.uniform_count - 1)
        hit = self.uniform_codes[clipped] == c
        out = np.where(hit, pos, self.uniform_count)
        return int(out) if np.ndim(code) == 0 else out


def _uniform_codes(P: int) -> np.ndarray:
    codes = {0, (1 << P) - 1}
    for run in range(1, P):
        base = (1 << run) - 1
        for k in range(P):
            codes.add(int(rol(base, k, P)))
    return np.array(sorted(codes), dtype=np.int64)


@lru_cache(maxsize=None)
def pattern_table(P: int = 8) -> PatternIndexTable:
    if P not in ALLOWED_P:
        raise ValueError(f"P must be one of {ALLOWED_P}, got {P}")
    codes = _uniform_codes(P)
    codes.setflags(write=False)
    return PatternIndexTable(P, codes)


def uniform_index(code, P: int = 8, table: PatternIndexTable | None = None):
    table = table if table is not None else pattern_table(P)
    return table.index(code)


def uniform_index_with_start(code, P: int = 8, start=0):
    """Uniform index of the bit string read from bit ``start`` onwards."""
    if np.any(np.asarray(start) < 0) or np.any(np.asarray(start) >= P):
        raise ValueError("start must lie in [0, P)")
    c = np.asarray(code, dtype=np.int64)
    out = pattern_table(P).index(ror(c, start, P))
    return int(out) if np.ndim(code) == 0 and np.ndim(start) == 0 else out


def code_space_size(P: int, variant: str) -> int:
    if variant == "raw":
        return 1 << P
    if variant == "uniform":
        return pattern_table(P).n_bins
    if variant == "ri":
        return 1 << P  # ri codes keep their numeric value
    if variant == "riu2":
        return P + 2
    raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")


def map_codes(codes, P: int, variant: str):
    if variant == "raw":
        return np.asarray(codes, dtype=np.int64)
    if variant == "uniform":
        return uniform_index(codes, P)
    if variant == "ri":
        return ri_code(codes, P)
    if variant == "riu2":
        return riu2_code(codes, P)
    raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")


# --------------------------------------------------------------------------
# Image-level codes
# --------------------------------------------------------------------------


@lru_cache(maxsize=64)
def _table_for(P: int, R: float):
    return kernels.sampling_table(P, R)


def lbp_code(img, x: float, y: float, cfg: LbpConfig = LbpConfig()) -> int:
    """Raw LBP code at a single (possibly sub-pixel) centre."""
    a = as_gray(img).data
    h, w = a.shape
    if x - cfg.R < 0 or y - cfg.R < 0 or x + cfg.R > w - 1 or y + cfg.R > h - 1:
        raise IndexError(f"sampling circle at ({x}, {y}) leaves the {w}x{h} image")
    vc = _bilinear(a, x, y)
    code = 0
    for k in range(cfg.P):
        ang = 2.0 * math.pi * k / cfg.P
        dx = round(cfg.R * math.cos(ang), 12) + 0.0
        dy = round(cfg.R * math.sin(ang), 12) + 0.0
        if _bilinear(a, x + dx, y + dy) >= vc:
            code |= 1 << k
    return code


def _bilinear(a: np.ndarray, x: float, y: float) -> float:
    x0 = int(math.floor(x))
    y0 = int(math.floor(y))
    tx = x - x0
    ty = y - y0
    v = 0.0
    for oy, wy in ((0, 1.0 - ty), (1, ty)):
        for ox, wx in ((0, 1.0 - tx), (1, tx)):
            wgt = wy * wx
            if wgt != 0.0:
                v += wgt * a[y0 + oy, x0 + ox]
    return v


def lbp_code_map(img, cfg: LbpConfig = LbpConfig(), margin: int | None = None) -> np.ndarray:
    """Codes for every centre at least ``margin`` pixels from the border.

    ``margin`` defaults to ``ceil(R)``; a larger value lets several radii
    share one centre grid. Result shape is ``(h - 2m, w - 2m)``.
    """
    a = as_gray(img).data
    m = cfg.margin if margin is None else int(margin)
    if m < cfg.margin:
        raise ValueError("margin smaller than the sampling radius")
    h, w = a.shape
    if h - 2 * m < 1 or w - 2 * m < 1:
        raise ValueError(f"image {w}x{h} too small for LBP radius {cfg.R}")
    start, roff, coff, wts = _table_for(cfg.P, float(cfg.R))
    return kernels.lbp_codes(np.ascontiguousarray(a), m, start, roff, coff, wts)


def full_code_map(img, cfg: LbpConfig = LbpConfig()) -> np.ndarray:
    """Image-sized code map with ``-1`` where the sampling circle leaves the image."""
    a = as_gray(img).data
    m = cfg.margin
    out = np.full(a.shape, -1, dtype=np.int64)
    out[m:a.shape[0] - m, m:a.shape[1] - m] = lbp_code_map(a, cfg)
    return out


def lbp_histogram(img, cfg: LbpConfig = LbpConfig(), variant: str = "riu2") -> np.ndarray:
    """L1-normalised histogram of the chosen code variant over valid centres."""
    n = code_space_size(cfg.P, variant)
    codes = lbp_code_map(img, cfg)
    idx = map_codes(codes.ravel(), cfg.P, variant)
    hist = np.bincount(idx, minlength=n).astype(np.float64)
    return hist / hist.sum()
