"""On-disk feature rows (``TFFC``) and per-image local descriptor store.

``TFFC`` layout (little-endian)::

    b"TFFC" | u32 version | u32 record count | u32 dim
    per record: 8-byte key (sha256 of the image path, truncated) | f32[dim]

A JSON sidecar ``<file>.json`` maps image path to record number and holds
the kind and config hash the rows were computed with. Records beyond what the
sidecar lists (an interrupted append) are dropped on open.
"""
from __future__ import annotations

import hashlib
import json
import os
import struct
from pathlib import Path

import numpy as np

MAGIC = b"TFFC"
VERSION = 1
_HEADER = struct.Struct("<4sIII")
KEY_BYTES = 8


class CacheError(ValueError):
    pass


def path_key(image: str) -> bytes:
    return hashlib.sha256(image.encode("utf-8")).digest()[:KEY_BYTES]


class FeatureCache:
    """Append-only row store for one feature kind and configuration."""

    def __init__(self, path, kind: str, dim: int, config_hash: str):
        self.path = Path(path)
        self.kind = kind
        self.dim = int(dim)
        self.config_hash = config_hash
        self._index: dict[str, int] = {}
        self._rows = np.zeros((0, self.dim), dtype="<f4")
        self.new_rows = 0  # appended since this object was opened

    @property
    def sidecar(self) -> Path:
        return self.path.with_name(self.path.name + ".json")

    @property
    def record_size(self) -> int:
        return KEY_BYTES + 4 * self.dim

    def __len__(self):
        return len(self._index)

    def __contains__(self, image: str):
        return image in self._index

    @classmethod
    def open(cls, path, kind: str, dim: int, config_hash: str) -> "FeatureCache":
        """Open an existing cache or create an empty one.

        Raises :class:`CacheError` when the file exists with a different
        kind, dimension or configuration hash.
        """
        cache = cls(path, kind, dim, config_hash)
        if cache.path.exists():
            cache._read()
        else:
            cache.path.parent.mkdir(parents=True, exist_ok=True)
            cache.path.write_bytes(_HEADER.pack(MAGIC, VERSION, 0, cache.dim))
            cache._write_sidecar()
        return cache

    @classmethod
    def load(cls, path) -> "FeatureCache":
        """Open an existing cache taking kind, dim and hash from its sidecar."""
        side = Path(str(path) + ".json")
        try:
            meta = json.loads(side.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise CacheError(f"unreadable cache index {side}: {exc}") from exc
        cache = cls(path, meta["kind"], meta["dim"], meta["config_hash"])
        cache._read()
        return cache

    def _read(self):
        raw = self.path.read_bytes()
        if len(raw) < _HEADER.size:
            raise CacheError(f"{self.path}: truncated header")
        magic, version, count, dim = _HEADER.unpack_from(raw)
        if magic != MAGIC:
            raise CacheError(f"{self.path}: not a TFFC file")
        if version != VERSION:
            raise CacheError(f"{self.path}: unsupported version {version}")
        if dim != self.dim:
            raise CacheError(f"{self.path}: cached dim {dim} but {self.dim} expected")
        try:
            meta = json.loads(self.sidecar.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise CacheError(f"unreadable cache index {self.sidecar}: {exc}") from exc
        if meta.get("kind") != self.kind or meta.get("config_hash") != self.config_hash:
            raise CacheError(f"{self.path}: cached with a different feature configuration")
        index = {str(k): int(v) for k, v in meta.get("records", {}).items()}
        n = len(index)
        if sorted(index.values()) != list(range(n)):
            raise CacheError(f"{self.sidecar}: record numbers are not contiguous")
        if count < n or len(raw) < _HEADER.size + n * self.record_size:
            raise CacheError(f"{self.path}: fewer records than the index lists")
        body = np.frombuffer(raw, dtype=np.uint8, count=n * self.record_size, offset=_HEADER.size)
        recs = body.reshape(n, self.record_size)
        for image, i in index.items():
            if recs[i, :KEY_BYTES].tobytes() != path_key(image):
                raise CacheError(f"{self.path}: key mismatch for {image!r}")
        self._rows = recs[:, KEY_BYTES:].copy().view("<f4").reshape(n, self.dim)
        self._index = index
        if count != n or len(raw) != _HEADER.size + n * self.record_size:
            self._truncate(n)

    def _truncate(self, n: int):
        with open(self.path, "r+b") as fh:
            fh.truncate(_HEADER.size + n * self.record_size)
            fh.seek(0)
            fh.write(_HEADER.pack(MAGIC, VERSION, n, self.dim))

    def _write_sidecar(self):
        meta = {"kind": self.kind, "dim": self.dim, "config_hash": self.config_hash,
                "version": VERSION, "records": self._index}
        tmp = self.sidecar.with_name(self.sidecar.name + ".tmp")
        tmp.write_text(json.dumps(meta, sort_keys=True))
        os.replace(tmp, self.sidecar)

    def add_many(self, items) -> int:
        """Append ``(image, row)`` pairs not cached yet; returns how many were written."""
        fresh, seen = [], set()
        for image, row in items:
            if image in self._index or image in seen:
                continue
            seen.add(image)
            r = np.asarray(row, dtype=np.float64).ravel()
            if r.shape[0] != self.dim:
                raise CacheError(f"row for {image!r} has dim {r.shape[0]}, cache holds {self.dim}")
            if not np.all(np.isfinite(r)):
                raise CacheError(f"row for {image!r} is not finite")
            fresh.append((image, r.astype("<f4")))
        if not fresh:
            return 0
        start = len(self._index)
        with open(self.path, "r+b") as fh:
            fh.seek(_HEADER.size + start * self.record_size)
            for image, r in fresh:
                fh.write(path_key(image))
                fh.write(r.tobytes())
            fh.seek(0)
            fh.write(_HEADER.pack(MAGIC, VERSION, start + len(fresh), self.dim))
        for k, (image, _) in enumerate(fresh):
            self._index[image] = start + k
        self._rows = np.concatenate([self._rows, np.stack([r for _, r in fresh])])
        self._write_sidecar()
        self.new_rows += len(fresh)
        return len(fresh)

    def add(self, image: str, row) -> bool:
        return self.add_many([(image, row)]) == 1

    def get(self, image: str) -> np.ndarray:
        try:
            return self._rows[self._index[image]].copy()
        except KeyError:
            raise CacheError(f"no cached row for {image!r}") from None

    def matrix(self, images) -> np.ndarray:
        """Rows for ``images`` in order, as float64."""
        missing = [im for im in images if im not in self._index]
        if missing:
            raise CacheError(f"{len(missing)} images missing from {self.path.name}, e.g. {missing[0]!r}")
        idx = np.fromiter((self._index[im] for im in images), dtype=np.int64, count=len(images))
        return self._rows[idx].astype(np.float64)


class DescriptorStore:
    """One ``.npy`` file of float32 local descriptors per image."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _file(self, image: str) -> Path:
        return self.root / (hashlib.sha256(image.encode("utf-8")).hexdigest()[:24] + ".npy")

    def __contains__(self, image: str):
        return self._file(image).exists()

    def put(self, image: str, data) -> None:
        f = self._file(image)
        tmp = f.with_name(f.stem + ".tmp.npy")
        np.save(tmp, np.asarray(data, dtype=np.float32))
        os.replace(tmp, f)

    def get(self, image: str) -> np.ndarray:
        try:
            return np.load(self._file(image)).astype(np.float64)
        except FileNotFoundError:
            raise CacheError(f"no stored descriptors for {image!r}") from None
