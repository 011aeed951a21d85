"""Single-orientation Gabor bank and the multi-resolution PRICoLGBP feature."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal

from .imgcore import GrayImage, affine_to_range, as_gray
from .lbp import LbpConfig
from .pricolbp import TemplateSet, descriptor_dim, pricolbp_descriptor


@dataclass(frozen=True)
class GaborBankConfig:
    """Wavelength is ``wavelength_per_scale * scale`` and the envelope width
    ``sigma_ratio * wavelength`` (0.56 is roughly a one-octave bandwidth)."""

    scales: tuple = (1, 2, 3, 4, 5, 6, 7)
    orientation: float = 0.0
    wavelength_per_scale: float = 4.0
    aspect: float = 0.5
    sigma_ratio: float = 0.56
    phase: float = 0.0

    def __post_init__(self):
        scales = tuple(int(s) for s in self.scales)
        if any(s <= 0 for s in scales):
            raise ValueError(f"scales must be positive integers, got {self.scales}")
        object.__setattr__(self, "scales", scales)

    def wavelength(self, scale: int) -> float:
        return self.wavelength_per_scale * scale

    def sigma(self, scale: int) -> float:
        return self.sigma_ratio * self.wavelength(scale)

    def half_width(self, scale: int) -> int:
        return int(math.ceil(3.0 * self.sigma(scale)))


def gabor_kernel(scale: int, cfg: GaborBankConfig = GaborBankConfig()) -> np.ndarray:
    """Real Gabor kernel with zero mean and unit L1 norm."""
    if scale not in cfg.scales:
        raise ValueError(f"scale {scale} not in bank {cfg.scales}")
    lam = cfg.wavelength(scale)
    sigma = cfg.sigma(scale)
    half = cfg.half_width(scale)
    t = np.arange(-half, half + 1, dtype=np.float64)
    y, x = np.meshgrid(t, t, indexing="ij")
    c, s = math.cos(cfg.orientation), math.sin(cfg.orientation)
    xr = x * c + y * s
    yr = -x * s + y * c
    g = np.exp(-(xr ** 2 + cfg.aspect ** 2 * yr ** 2) / (2.0 * sigma ** 2))
    g *= np.cos(2.0 * math.pi * xr / lam + cfg.phase)
    g -= g.mean()
    return g / np.abs(g).sum()


def convolve(img, kernel, normalize: bool = True):
    """Same-size correlation with edge replication.

    With ``normalize`` the signed response is stretched to [0, 255] and
    returned as a :class:`GrayImage`; otherwise the raw float map is returned.
    """
    a = as_gray(img).data
    k = np.asarray(kernel, dtype=np.float64)
    if k.ndim != 2:
        raise ValueError("kernel must be 2-D")
    kh, kw = k.shape
    if kh > a.shape[0] or kw > a.shape[1]:
        raise ValueError(
            f"kernel {kw}x{kh} larger than image {a.shape[1]}x{a.shape[0]}"
        )
    top, left = kh // 2, kw // 2
    padded = np.pad(a, ((top, kh - 1 - top), (left, kw - 1 - left)), mode="edge")
    out = signal.correlate(padded, k, mode="valid")
    if not normalize:
        return out
    return GrayImage(affine_to_range(out))


def pricolgbp_dim(n_scales: int, n_templates: int, P: int = 8) -> int:
    return (1 + n_scales) * descriptor_dim(P, n_templates)


def pricolgbp(img, lbp_cfg: LbpConfig = LbpConfig(), templates: TemplateSet = TemplateSet(),
              bank: GaborBankConfig = GaborBankConfig()) -> np.ndarray:
    """PRICoLBP of the image and of each Gabor response, concatenated in scale order."""
    g = as_gray(img)
    blocks = [pricolbp_descriptor(g, lbp_cfg, templates)]
    for scale in bank.scales:
        response = convolve(g, gabor_kernel(scale, bank))
        blocks.append(pricolbp_descriptor(response, lbp_cfg, templates))
    return np.concatenate(blocks)
