"""Image containers, PGM/PPM decoding and the basic raster operations.

Intensities are kept as float64 on the [0, 255] scale so that LBP
thresholding works on the same values a user sees in an 8-bit file.
Arrays are indexed ``[row, col]``; ``x`` is the column and ``y`` the row.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

CHANNELS = ("red", "green", "blue")


class ImageFormatError(ValueError):
    """Raised for unreadable, malformed or unsupported image files."""


def _frozen(a) -> np.ndarray:
    out = np.array(a, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Single-channel raster; ``data`` has shape ``(height, width)``."""

    data: np.ndarray

    def __post_init__(self):
        a = _frozen(self.data)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise ValueError(f"GrayImage needs a non-empty 2-D array, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("GrayImage values must be finite")
        object.__setattr__(self, "data", a)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def shape(self):
        return self.data.shape


@dataclass(frozen=True, eq=False)
class ColorImage:
    red: np.ndarray
    green: np.ndarray
    blue: np.ndarray

    def __post_init__(self):
        planes = [_frozen(getattr(self, c)) for c in CHANNELS]
        if any(p.shape != planes[0].shape or p.ndim != 2 for p in planes):
            raise ValueError("all three planes must share one 2-D shape")
        for name, p in zip(CHANNELS, planes):
            object.__setattr__(self, name, p)

    @property
    def width(self) -> int:
        return self.red.shape[1]

    @property
    def height(self) -> int:
        return self.red.shape[0]

    @classmethod
    def from_gray(cls, plane) -> "ColorImage":
        return cls(plane, plane, plane)


def as_gray(img) -> GrayImage:
    if isinstance(img, GrayImage):
        return img
    return GrayImage(np.asarray(img, dtype=np.float64))


# --------------------------------------------------------------------------
# Decoding
# --------------------------------------------------------------------------


def _read_netpbm(raw: bytes) -> tuple[str, np.ndarray]:
    magic = raw[:2]
    if magic not in (b"P5", b"P6"):
        raise ImageFormatError(f"not a binary PGM/PPM file (magic {magic!r})")
    fields: list[int] = []
    pos = 2
    n = len(raw)
    while len(fields) < 3:
        while pos < n and raw[pos:pos + 1].isspace():
            pos += 1
        if pos < n and raw[pos:pos + 1] == b"#":
            while pos < n and raw[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and raw[pos:pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise ImageFormatError("malformed header")
        fields.append(int(raw[start:pos]))
    # exactly one whitespace byte separates the header from the raster
    if pos >= n or not raw[pos:pos + 1].isspace():
        raise ImageFormatError("malformed header")
    pos += 1
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise ImageFormatError("image dimensions must be positive")
    if not 1 <= maxval <= 65535:
        raise ImageFormatError(f"unsupported bit depth (maxval {maxval})")
    depth = 3 if magic == b"P6" else 1
    itemsize = 1 if maxval < 256 else 2
    expected = width * height * depth * itemsize
    body = raw[pos:pos + expected]
    if len(body) < expected:
        raise ImageFormatError(
            f"truncated raster: expected {expected} bytes, found {len(body)}"
        )
    dtype = np.uint8 if itemsize == 1 else np.dtype(">u2")
    values = np.frombuffer(body, dtype=dtype).astype(np.float64)
    values *= 255.0 / maxval
    if depth == 1:
        return "gray", values.reshape(height, width)
    return "rgb", values.reshape(height, width, 3)


def load_image(path) -> ColorImage:
    """Decode a binary PGM/PPM (or PNG, when Pillow is installed).

    Grayscale sources give three identical planes. 16-bit rasters are
    scaled down to [0, 255].
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ImageFormatError(f"cannot read {path}: {exc}") from exc
    if raw[:8] == b"\x89PNG\r\n\x1a\n":
        return _load_png(path)
    kind, arr = _read_netpbm(raw)
    if kind == "gray":
        return ColorImage.from_gray(arr)
    return ColorImage(arr[..., 0], arr[..., 1], arr[..., 2])


def _load_png(path: Path) -> ColorImage:
    try:
        from PIL import Image
    except ImportError as exc:  # pragma: no cover
        raise ImageFormatError("PNG support needs Pillow") from exc
    try:
        with Image.open(path) as im:
            mode = im.mode
            if mode in ("I;16", "I;16B", "I"):
                arr = np.asarray(im, dtype=np.float64) * (255.0 / 65535.0)
                return ColorImage.from_gray(arr)
            if mode in ("L", "1", "P", "LA"):
                arr = np.asarray(im.convert("L"), dtype=np.float64)
                return ColorImage.from_gray(arr)
            arr = np.asarray(im.convert("RGB"), dtype=np.float64)
    except OSError as exc:
        raise ImageFormatError(f"cannot decode {path}: {exc}") from exc
    return ColorImage(arr[..., 0], arr[..., 1], arr[..., 2])


def save_pgm(img, path) -> None:
    """Debug dump as an 8-bit binary PGM (values rounded and clipped)."""
    a = as_gray(img).data
    q = np.clip(np.floor(a + 0.5), 0, 255).astype(np.uint8)
    h, w = q.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(q.tobytes())


def save_ppm(img: ColorImage, path) -> None:
    rgb = np.stack([img.red, img.green, img.blue], axis=-1)
    q = np.clip(np.floor(rgb + 0.5), 0, 255).astype(np.uint8)
    h, w = q.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(q.tobytes())


def extract_channel(img: ColorImage, channel: str = "green") -> GrayImage:
    if channel == "gray":
        return to_gray(img)
    if channel not in CHANNELS:
        raise ValueError(f"channel must be one of {CHANNELS + ('gray',)}, got {channel!r}")
    return GrayImage(getattr(img, channel))


def to_gray(img: ColorImage) -> GrayImage:
    """ITU-R BT.601 luma; identical planes pass through unchanged."""
    if np.array_equal(img.red, img.green) and np.array_equal(img.green, img.blue):
        return GrayImage(img.green)
    return GrayImage(0.299 * img.red + 0.587 * img.green + 0.114 * img.blue)


# --------------------------------------------------------------------------
# Filtering and resampling
# --------------------------------------------------------------------------


def gaussian_kernel1d(sigma: float) -> np.ndarray:
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    half = int(math.ceil(3.0 * sigma))
    t = np.arange(-half, half + 1, dtype=np.float64)
    k = np.exp(-0.5 * (t / sigma) ** 2)
    return k / k.sum()


def gaussian_smooth(img, sigma: float) -> GrayImage:
    """Separable Gaussian blur, half-width ceil(3 sigma), edge replication."""
    k = gaussian_kernel1d(sigma)
    a = as_gray(img).data
    out = ndimage.correlate1d(a, k, axis=0, mode="nearest")
    out = ndimage.correlate1d(out, k, axis=1, mode="nearest")
    return GrayImage(out)


def resize_min_side(img, min_side: int = 64) -> GrayImage:
    """Bilinear upscale so the shorter side reaches ``min_side``.

    Images already large enough are returned unchanged.
    """
    if min_side < 1:
        raise ValueError("min_side must be >= 1")
    g = as_gray(img)
    h, w = g.shape
    short = min(h, w)
    if short >= min_side:
        return g
    factor = min_side / short
    if h <= w:
        new_h, new_w = min_side, max(1, int(math.floor(w * factor + 0.5)))
    else:
        new_w, new_h = min_side, max(1, int(math.floor(h * factor + 0.5)))
    # pixel-centre alignment
    rows = (np.arange(new_h) + 0.5) * (h / new_h) - 0.5
    cols = (np.arange(new_w) + 0.5) * (w / new_w) - 0.5
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    out = ndimage.map_coordinates(g.data, [rr, cc], order=1, mode="nearest")
    return GrayImage(out)


def affine_to_range(a: np.ndarray, lo: float = 0.0, hi: float = 255.0) -> np.ndarray:
    """Map min to ``lo`` and max to ``hi``; a constant array maps to ``lo``."""
    a = np.asarray(a, dtype=np.float64)
    amin = a.min()
    span = a.max() - amin
    if not span > 0:
        return np.full_like(a, lo)
    return lo + ((a - amin) / span) * (hi - lo)


def log_enhance(img) -> GrayImage:
    """ln(1 + I) followed by a stretch to [0, 255]."""
    a = as_gray(img).data
    return GrayImage(affine_to_range(np.log1p(a)))
