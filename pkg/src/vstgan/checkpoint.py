"""Binary checkpoint format.

Layout (little-endian throughout):

    magic   4 bytes  b"VSTG"
    version u32
    seed    i64
    config  u32 length + UTF-8 text (canonical config echo)
    count   u32
    entries, sorted lexicographically by name:
        name   u32 length + UTF-8 bytes
        dtype  u8   (0 = float32, 1 = float64)
        ndim   u8
        dims   u32 per axis
    payloads: raw array bytes, contiguous, in manifest order

Round-trips are bit-identical; loaders reject wrong magic, version
mismatches, and truncated payloads with specific errors.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = ["CheckpointError", "Checkpoint", "save_checkpoint", "load_checkpoint", "MAGIC", "VERSION"]

MAGIC = b"VSTG"
VERSION = 1

_DTYPE_CODES = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}
_CODE_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}


class CheckpointError(ValueError):
    """Checkpoint file is malformed or from an incompatible version."""


@dataclass
class Checkpoint:
    tensors: dict[str, np.ndarray]
    config_echo: str
    seed: int
    version: int = VERSION


def save_checkpoint(path, tensors: dict[str, np.ndarray], config_echo: str = "",
                    seed: int = 0) -> None:
    names = sorted(tensors)
    out = bytearray()
    out += MAGIC
    out += struct.pack("<I", VERSION)
    out += struct.pack("<q", int(seed))
    cfg = config_echo.encode("utf-8")
    out += struct.pack("<I", len(cfg))
    out += cfg
    out += struct.pack("<I", len(names))
    arrays = []
    for name in names:
        arr = np.ascontiguousarray(tensors[name])
        if arr.dtype not in _DTYPE_CODES:
            raise CheckpointError(f"tensor {name!r} has unsupported dtype {arr.dtype}")
        arr = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
        nb = name.encode("utf-8")
        out += struct.pack("<I", len(nb))
        out += nb
        out += struct.pack("<BB", _DTYPE_CODES[np.dtype(arr.dtype.newbyteorder("="))], arr.ndim)
        for dim in arr.shape:
            out += struct.pack("<I", dim)
        arrays.append(arr)
    for arr in arrays:
        out += arr.tobytes()
    Path(path).write_bytes(bytes(out))


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.blob):
            raise CheckpointError(
                f"truncated checkpoint: needed {n} bytes for {what}, "
                f"have {len(self.blob) - self.pos}")
        chunk = self.blob[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]


def load_checkpoint(path) -> Checkpoint:
    blob = Path(path).read_bytes()
    r = _Reader(blob)
    if r.take(4, "magic") != MAGIC:
        raise CheckpointError(f"not a checkpoint: {path}")
    version = r.u32("version")
    if version != VERSION:
        raise CheckpointError(
            f"checkpoint version {version} not supported (this build reads version {VERSION})")
    seed = struct.unpack("<q", r.take(8, "seed"))[0]
    cfg_len = r.u32("config length")
    config_echo = r.take(cfg_len, "config echo").decode("utf-8")
    count = r.u32("manifest count")
    manifest = []
    for k in range(count):
        name_len = r.u32(f"name length of entry {k}")
        name = r.take(name_len, f"name of entry {k}").decode("utf-8")
        code, ndim = struct.unpack("<BB", r.take(2, f"dtype/ndim of {name!r}"))
        if code not in _CODE_DTYPES:
            raise CheckpointError(f"entry {name!r} has unknown dtype code {code}")
        dims = tuple(r.u32(f"dim of {name!r}") for _ in range(ndim))
        manifest.append((name, _CODE_DTYPES[code], dims))
    tensors: dict[str, np.ndarray] = {}
    for name, dtype, dims in manifest:
        nbytes = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
        raw = r.take(nbytes, f"payload of {name!r} ({nbytes} bytes)")
        tensors[name] = np.frombuffer(raw, dtype=dtype).reshape(dims).copy()
    if r.pos != len(blob):
        raise CheckpointError(
            f"payload length mismatch: {len(blob) - r.pos} unexpected trailing bytes")
    return Checkpoint(tensors=tensors, config_echo=config_echo, seed=seed, version=version)
