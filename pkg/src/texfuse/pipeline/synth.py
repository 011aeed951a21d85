"""Synthetic four-class texture corpus with specimen structure.

Each specimen fixes the texture parameters of its class (with a little
per-image jitter); each image then gets a random rotation, gain, offset and
sensor noise. Classes: oriented sinusoid gratings, Gaussian blobs,
checkerboards and anisotropically low-pass filtered noise.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy import ndimage

from ..imgcore import save_pgm
from .manifest import ManifestEntry, build_manifest, write_manifest

CLASSES = ("grating", "blobs", "checker", "noise")


def _coords(size: int, angle: float, shift):
    t = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    y, x = np.meshgrid(t, t, indexing="ij")
    c, s = np.cos(angle), np.sin(angle)
    return x * c + y * s + shift[0], -x * s + y * c + shift[1]


def specimen_params(label: str, rng: np.random.Generator) -> dict:
    if label == "grating":
        return {"wavelength": rng.uniform(7.0, 11.0)}
    if label == "blobs":
        return {"sigma": rng.uniform(2.0, 3.0), "density": rng.uniform(0.005, 0.009)}
    if label == "checker":
        return {"cell": rng.uniform(5.0, 8.0)}
    if label == "noise":
        return {"sigma_long": rng.uniform(6.0, 9.0), "sigma_short": rng.uniform(0.8, 1.2)}
    raise ValueError(f"unknown class {label!r}")


def render(label: str, params: dict, size: int, rng: np.random.Generator,
           rotate: bool = True) -> np.ndarray:
    """One image in [0, 255] (before quantisation)."""
    jitter = rng.uniform(0.95, 1.05)
    angle = rng.uniform(0.0, 2.0 * np.pi) if rotate else 0.0
    shift = rng.uniform(0.0, 50.0, size=2)
    if label == "grating":
        x, _ = _coords(size, angle, shift)
        base = np.cos(2.0 * np.pi * x / (params["wavelength"] * jitter))
    elif label == "checker":
        x, y = _coords(size, angle, shift)
        cell = params["cell"] * jitter
        base = np.where((np.floor(x / cell) + np.floor(y / cell)) % 2 == 0, 1.0, -1.0)
        base = ndimage.gaussian_filter(base, 0.7)
    elif label == "blobs":
        n = max(1, rng.poisson(params["density"] * size * size))
        field = np.zeros((size, size))
        field[rng.integers(0, size, n), rng.integers(0, size, n)] = 1.0
        base = ndimage.gaussian_filter(field, params["sigma"] * jitter, mode="wrap")
        base = base / base.max() * 2.0 - 1.0
    elif label == "noise":
        pad = size
        big = rng.normal(size=(size + 2 * pad, size + 2 * pad))
        sig = (params["sigma_short"] * jitter, params["sigma_long"] * jitter)
        f = ndimage.gaussian_filter(big, sig, mode="wrap")
        f = ndimage.rotate(f, np.degrees(angle), reshape=False, order=1, mode="reflect")
        base = f[pad:pad + size, pad:pad + size]
        base = base / (np.abs(base).max() + 1e-12)
    else:
        raise ValueError(f"unknown class {label!r}")
    gain = rng.uniform(0.6, 1.0)
    offset = rng.uniform(-20.0, 20.0)
    img = 128.0 + offset + 100.0 * gain * base + rng.normal(0.0, 4.0, size=base.shape)
    return np.clip(img, 0.0, 255.0)


def generate_corpus(out_dir, n_specimens: int = 4, n_images: int = 20, size: int = 64,
                    seed: int = 0, rotate: bool = True, classes=CLASSES):
    """Write PGM images plus ``manifest.jsonl`` under ``out_dir``; return the manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    entries = []
    for label in classes:
        for s in range(n_specimens):
            specimen = f"{label}-s{s}"
            params = specimen_params(label, rng)
            sub = out / specimen
            sub.mkdir(exist_ok=True)
            for i in range(n_images):
                img = np.round(render(label, params, size, rng, rotate))
                rel = f"{specimen}/img_{i:03d}.pgm"
                save_pgm(img, out / rel)
                entries.append(ManifestEntry(rel, f"{specimen}-c{i}", specimen, label, "unknown"))
    manifest = build_manifest(entries, classes, out)
    write_manifest(out / "manifest.jsonl", manifest)
    return manifest
