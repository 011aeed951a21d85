"""Pairwise rotation-invariant co-occurrence of LBPs.

For a reference pixel ``A`` the co-point is placed in ``A``'s own gradient
frame, ``B = A + a * g(A) + b * n(A)``, with ``n`` the gradient turned by
+90 degrees. ``A`` contributes its riu2 code; ``B`` contributes its uniform
index read from the bit where ``A``'s code attains its minimal rotation.
Rotating the image rotates the frame, both codes and the start bit together,
so the co-bin does not change.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .imgcore import as_gray
from .lbp import LbpConfig, full_code_map, min_rotation_index, pattern_table, riu2_code

GRADIENT_EPS = 1e-6

DEFAULT_TEMPLATES = (
    (2.0, 0.0), (0.0, 2.0), (-2.0, 0.0), (0.0, -2.0),
    (2.0, 2.0), (-2.0, 2.0), (-2.0, -2.0), (2.0, -2.0),
    (4.0, 0.0), (0.0, 4.0),
)
TWO_TEMPLATES = ((2.0, 0.0), (0.0, 2.0))


@dataclass(frozen=True, eq=False)
class GradientField:
    dx: np.ndarray
    dy: np.ndarray
    magnitude: np.ndarray
    orientation: np.ndarray


def gradient_field(img) -> GradientField:
    """Central differences inside, one-sided differences on the border."""
    a = as_gray(img).data
    if a.shape[0] < 3 or a.shape[1] < 3:
        raise ValueError(f"gradient needs at least 3x3 pixels, got {a.shape[1]}x{a.shape[0]}")
    dy, dx = np.gradient(a)
    return GradientField(dx, dy, np.hypot(dx, dy), np.arctan2(dy, dx))


@dataclass(frozen=True)
class TemplateSet:
    pairs: tuple = DEFAULT_TEMPLATES

    def __post_init__(self):
        pairs = tuple((float(a), float(b)) for a, b in self.pairs)
        if not pairs:
            raise ValueError("template set must not be empty")
        if not all(math.isfinite(a) and math.isfinite(b) for a, b in pairs):
            raise ValueError("template coefficients must be finite")
        object.__setattr__(self, "pairs", pairs)

    def __len__(self):
        return len(self.pairs)

    @property
    def reach(self) -> float:
        return max(math.hypot(a, b) for a, b in self.pairs)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.pairs, dtype=np.float64)

    @classmethod
    def preset(cls, name: str) -> "TemplateSet":
        if name in ("ten", "10", "default"):
            return cls(DEFAULT_TEMPLATES)
        if name in ("two", "2"):
            return cls(TWO_TEMPLATES)
        raise ValueError(f"unknown template preset {name!r}")


def co_point(A, grad_dir, normal_dir, a: float, b: float, rounded: bool = True):
    """``A + a * grad_dir + b * normal_dir``, optionally snapped to a pixel."""
    x = A[0] + a * grad_dir[0] + b * normal_dir[0]
    y = A[1] + a * grad_dir[1] + b * normal_dir[1]
    if rounded:
        return (int(math.floor(x + 0.5)), int(math.floor(y + 0.5)))
    return (x, y)


def descriptor_dim(P: int = 8, n_templates: int = 1) -> int:
    return (P + 2) * pattern_table(P).n_bins * n_templates


def pricolbp_blocks(img, cfg: LbpConfig = LbpConfig(),
                    templates: TemplateSet = TemplateSet()) -> np.ndarray:
    """Raw weighted co-occurrence counts, shape ``(n_templates, 590)`` for P=8."""
    a = as_gray(img).data
    if len(templates) == 0:
        raise ValueError("template set must not be empty")
    need = 2 * math.ceil(templates.reach + cfg.R) + 3
    if a.shape[0] < need or a.shape[1] < need:
        raise ValueError(
            f"image {a.shape[1]}x{a.shape[0]} too small; PRICoLBP needs {need}x{need}"
        )
    grad = gradient_field(a)
    codes = full_code_map(a, cfg)
    valid = codes >= 0
    riu = np.where(valid, riu2_code(np.where(valid, codes, 0), cfg.P), -1)
    minrot = np.where(valid, min_rotation_index(np.where(valid, codes, 0), cfg.P), 0)
    table = pattern_table(cfg.P)
    return kernels.pricolbp_accumulate(
        codes, riu.astype(np.int64), minrot.astype(np.int64),
        np.ascontiguousarray(grad.magnitude), np.ascontiguousarray(grad.dx),
        np.ascontiguousarray(grad.dy), templates.as_array(),
        table.uniform_codes, cfg.P, table.n_bins, GRADIENT_EPS,
    )


def pricolbp_descriptor(img, cfg: LbpConfig = LbpConfig(),
                        templates: TemplateSet = TemplateSet()) -> np.ndarray:
    """Concatenated per-template blocks, L1-normalised over the whole vector."""
    vec = pricolbp_blocks(img, cfg, templates).ravel()
    total = vec.sum()
    return vec / total if total > 0 else vec
