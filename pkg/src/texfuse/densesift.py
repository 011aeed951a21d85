"""Dense multi-scale RootSIFT on large patches.

Each patch gets the usual 4x4 spatial x 8 orientation SIFT layout, with a
Gaussian window of sigma = patch_size / 2 and trilinear soft assignment.
Descriptor index is ``(by * 4 + bx) * 8 + o``. Scales are produced by
blurring at fixed resolution, not by a pyramid.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .imgcore import as_gray, gaussian_smooth, resize_min_side

N_SPATIAL = 4
N_ORIENT = 8
SIFT_DIM = N_SPATIAL * N_SPATIAL * N_ORIENT
CLAMP = 0.2
_ZERO_NORM = 1e-12


@dataclass(frozen=True)
class PatchGridConfig:
    patch_size: int = 41
    step: int = 2
    scale_sigmas: tuple = tuple(1.5 ** k for k in range(1, 7))
    min_side: int = 64

    def __post_init__(self):
        if self.patch_size < 16:
            raise ValueError("patch_size must be >= 16")
        if self.step < 1:
            raise ValueError("step must be >= 1")
        sig = tuple(float(s) for s in self.scale_sigmas)
        if not sig or any(s <= 0 for s in sig) or list(sig) != sorted(sig):
            raise ValueError("scale_sigmas must be non-empty, positive and ascending")
        object.__setattr__(self, "scale_sigmas", sig)


@dataclass(frozen=True, eq=False)
class DescriptorSet:
    """Rows of one image's local descriptors plus where they came from."""

    data: np.ndarray
    positions: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), np.int64))
    scales: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))

    @property
    def count(self) -> int:
        return int(self.data.shape[0])

    @property
    def dim(self) -> int:
        return int(self.data.shape[1])


def _axis_positions(side: int, patch: int, step: int) -> np.ndarray:
    if side < patch:
        raise ValueError(f"image side {side} smaller than patch {patch}")
    return np.arange((side - patch) // step + 1, dtype=np.int64) * step


def sample_grid(width: int, height: int, cfg: PatchGridConfig = PatchGridConfig()) -> np.ndarray:
    """Patch top-left corners as ``(x, y)`` rows, row-major."""
    xs = _axis_positions(width, cfg.patch_size, cfg.step)
    ys = _axis_positions(height, cfg.patch_size, cfg.step)
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    return np.stack([xx.ravel(), yy.ravel()], axis=1)


def spatial_weights(patch_size: int) -> np.ndarray:
    """Per-axis weights ``(patch_size, 4)``: Gaussian window times the
    triangular share of each pixel in each spatial bin."""
    S = patch_size
    u = np.arange(S, dtype=np.float64)
    sigma = S / 2.0
    g = np.exp(-0.5 * ((u - (S - 1) / 2.0) / sigma) ** 2)
    pos = (u + 0.5) * (N_SPATIAL / S) - 0.5
    tri = np.maximum(0.0, 1.0 - np.abs(pos[:, None] - np.arange(N_SPATIAL)[None, :]))
    return g[:, None] * tri


def orientation_histograms(a: np.ndarray) -> np.ndarray:
    """Per-pixel gradient magnitude split between two adjacent orientation bins."""
    dy, dx = np.gradient(a)
    mag = np.hypot(dx, dy)
    theta = np.mod(np.arctan2(dy, dx), 2.0 * np.pi)
    pos = theta * (N_ORIENT / (2.0 * np.pi))
    o0 = np.floor(pos)
    frac = pos - o0
    o0 = o0.astype(np.int64) % N_ORIENT
    o1 = (o0 + 1) % N_ORIENT
    out = np.zeros(a.shape + (N_ORIENT,))
    rr, cc = np.indices(a.shape)
    # o0 != o1, so each (pixel, bin) is written at most once per line
    out[rr, cc, o0] = mag * (1.0 - frac)
    out[rr, cc, o1] += mag * frac
    return out


def _normalize_sift(raw: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(raw, axis=1, keepdims=True)
    nz = norms[:, 0] > _ZERO_NORM
    out = np.zeros_like(raw)
    v = raw[nz] / norms[nz]
    v = np.minimum(v, CLAMP)
    n2 = np.linalg.norm(v, axis=1, keepdims=True)
    out[nz] = v / n2
    return out


def _grid_descriptors(a: np.ndarray, tops: np.ndarray, lefts: np.ndarray, patch: int) -> np.ndarray:
    ohist = orientation_histograms(a)
    w = spatial_weights(patch)
    raw = kernels.sift_bins(ohist, w, w, tops, lefts)
    return _normalize_sift(raw.reshape(tops.shape[0] * lefts.shape[0], SIFT_DIM))


def sift_descriptor(img, top_left, patch_size: int = 41) -> np.ndarray:
    """SIFT descriptor (L2, clamp at 0.2, L2) of one square patch."""
    a = as_gray(img).data
    x, y = int(top_left[0]), int(top_left[1])
    if x < 0 or y < 0 or x + patch_size > a.shape[1] or y + patch_size > a.shape[0]:
        raise IndexError(f"patch at ({x}, {y}) of size {patch_size} leaves the image")
    return _grid_descriptors(a, np.array([y]), np.array([x]), patch_size)[0]


def root_sift(desc) -> np.ndarray:
    """L1-normalise then take the element-wise square root (rows or a single vector)."""
    d = np.asarray(desc, dtype=np.float64)
    if np.any(d < 0):
        raise ValueError("RootSIFT needs non-negative input")
    s = d.sum(axis=-1, keepdims=True)
    safe = np.where(s > 0, s, 1.0)
    return np.where(s > 0, np.sqrt(d / safe), 0.0)


def extract_image_rootsifts(img, cfg: PatchGridConfig = PatchGridConfig()) -> DescriptorSet:
    g = resize_min_side(as_gray(img), cfg.min_side)
    h, w = g.shape
    tops = _axis_positions(h, cfg.patch_size, cfg.step)
    lefts = _axis_positions(w, cfg.patch_size, cfg.step)
    yy, xx = np.meshgrid(tops, lefts, indexing="ij")
    pos = np.stack([xx.ravel(), yy.ravel()], axis=1)
    rows, positions, scales = [], [], []
    for si, sigma in enumerate(cfg.scale_sigmas):
        smoothed = gaussian_smooth(g, sigma).data
        desc = _grid_descriptors(smoothed, tops, lefts, cfg.patch_size)
        keep = np.any(desc > 0, axis=1)
        rows.append(root_sift(desc[keep]))
        positions.append(pos[keep])
        scales.append(np.full(int(keep.sum()), si, dtype=np.int64))
    return DescriptorSet(
        np.concatenate(rows) if rows else np.zeros((0, SIFT_DIM)),
        np.concatenate(positions) if positions else np.zeros((0, 2), np.int64),
        np.concatenate(scales) if scales else np.zeros(0, np.int64),
    )
