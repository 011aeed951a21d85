"""``TFMD`` tensor container used for every fitted model.

Byte layout (all integers little-endian)::

    b"TFMD"                      magic
    u32 version                  currently 1
    u32 meta_len, meta bytes     UTF-8 JSON object (model kind, labels, ...)
    u32 n_tensors
    repeated n_tensors times:
        u32 name_len, name bytes (UTF-8)
        u32 ndim
        u64 dims[ndim]
        f64 payload[prod(dims)]  C order
"""
from __future__ import annotations

import io
import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"TFMD"
VERSION = 1


class ContainerError(ValueError):
    pass


def dumps(tensors: dict, meta: dict | None = None) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", VERSION))
    mbytes = json.dumps(meta or {}, sort_keys=True).encode("utf-8")
    buf.write(struct.pack("<I", len(mbytes)))
    buf.write(mbytes)
    buf.write(struct.pack("<I", len(tensors)))
    for name, value in tensors.items():
        arr = np.ascontiguousarray(value, dtype="<f8")
        nb = name.encode("utf-8")
        buf.write(struct.pack("<I", len(nb)))
        buf.write(nb)
        buf.write(struct.pack("<I", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        buf.write(arr.tobytes())
    return buf.getvalue()


def loads(raw: bytes) -> tuple[dict, dict]:
    view = memoryview(raw)
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(view):
            raise ContainerError("truncated TFMD container")
        chunk = view[pos:pos + n]
        pos += n
        return chunk

    if bytes(take(4)) != MAGIC:
        raise ContainerError("not a TFMD container")
    (version,) = struct.unpack("<I", take(4))
    if version != VERSION:
        raise ContainerError(f"unsupported TFMD version {version}")
    (mlen,) = struct.unpack("<I", take(4))
    meta = json.loads(bytes(take(mlen)).decode("utf-8"))
    (count,) = struct.unpack("<I", take(4))
    tensors = {}
    for _ in range(count):
        (nlen,) = struct.unpack("<I", take(4))
        name = bytes(take(nlen)).decode("utf-8")
        (ndim,) = struct.unpack("<I", take(4))
        shape = struct.unpack(f"<{ndim}Q", take(8 * ndim)) if ndim else ()
        size = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(take(8 * size), dtype="<f8").astype(np.float64)
        tensors[name] = arr.reshape(shape)
    if pos != len(view):
        raise ContainerError("trailing bytes after last tensor")
    return tensors, meta


def save(path, tensors: dict, meta: dict | None = None) -> None:
    Path(path).write_bytes(dumps(tensors, meta))


def load(path) -> tuple[dict, dict]:
    return loads(Path(path).read_bytes())
