"""Attention-dump file format bridging real-model exports and the analysis engine.

Layout (little-endian throughout):

    offset  size  field
    0       4     magic "GBA1"
    4       2     version (u16, currently 1)
    6       4     layer_count (u32)
    10      4     head_count (u32)
    14      4     query_count (u32)
    18      4     key_count (u32)          == history_extent + query_count
    22      4     window_start (u32)
    26      4     history_extent (u32)
    30      2     dtype code (u16, 1 = float32)
    32      4     CRC-32 over bytes 0..31 plus the payload
    36      ...   payload: float32, row-major in (layer, head, query, key) order

The checksum covers the header prefix as well as the payload so that any
single-bit flip anywhere in the file fails closed. Writes are atomic (temp
file + rename); readers validate every header invariant before exposing any
payload. One dump holds one frontier; multi-frontier sessions pair the dumps
with a plain-text manifest (one relative path per line, decode order).
"""

from __future__ import annotations

import os
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .attention import AttentionTensor, WindowSpec
from .errors import (
    DumpCorruptionError,
    DumpFormatError,
    DumpTruncationError,
    DumpVersionError,
)

MAGIC = b"GBA1"
VERSION = 1
DTYPE_F32 = 1

_PREFIX = struct.Struct("<4sHIIIIIIH")  # everything before the checksum
_CRC = struct.Struct("<I")
HEADER_SIZE = _PREFIX.size + _CRC.size


@dataclass(frozen=True)
class DumpHeader:
    version: int
    layer_count: int
    head_count: int
    query_count: int
    key_count: int
    window_start: int
    history_extent: int
    dtype: int
    checksum: int

    @property
    def payload_size(self) -> int:
        return 4 * self.layer_count * self.head_count * self.query_count * self.key_count

    def window(self) -> WindowSpec:
        return WindowSpec(
            start=self.window_start,
            end=self.window_start + self.query_count,
            history_extent=self.history_extent,
        )


def write_dump(path, tensor: AttentionTensor, window: WindowSpec) -> None:
    """Write one ROI dump atomically. The tensor must be the ROI for `window`."""
    if tensor.queries != window.length or tensor.keys != window.key_count:
        raise DumpFormatError(
            f"tensor shape ({tensor.queries}, {tensor.keys}) does not match window "
            f"({window.length}, {window.key_count})"
        )
    payload = np.ascontiguousarray(tensor.weights, dtype="<f4").tobytes()
    prefix = _PREFIX.pack(
        MAGIC,
        VERSION,
        tensor.layers,
        tensor.heads,
        tensor.queries,
        tensor.keys,
        window.start,
        window.history_extent,
        DTYPE_F32,
    )
    crc = zlib.crc32(payload, zlib.crc32(prefix))
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    try:
        with open(tmp, "wb") as fh:
            fh.write(prefix)
            fh.write(_CRC.pack(crc))
            fh.write(payload)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except OSError:
        tmp.unlink(missing_ok=True)
        raise


def _parse_header(blob: bytes) -> DumpHeader:
    if len(blob) < HEADER_SIZE:
        raise DumpTruncationError(f"file holds {len(blob)} bytes, header needs {HEADER_SIZE}")
    magic, version, layers, heads, queries, keys, start, history, dtype = _PREFIX.unpack_from(
        blob, 0
    )
    if magic != MAGIC:
        raise DumpFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise DumpVersionError(f"unknown dump version {version}")
    if dtype != DTYPE_F32:
        raise DumpFormatError(f"unknown dtype code {dtype}")
    (checksum,) = _CRC.unpack_from(blob, _PREFIX.size)
    header = DumpHeader(
        version=version,
        layer_count=layers,
        head_count=heads,
        query_count=queries,
        key_count=keys,
        window_start=start,
        history_extent=history,
        dtype=dtype,
        checksum=checksum,
    )
    if min(layers, heads, queries, keys) < 1:
        raise DumpFormatError("all tensor dimensions must be >= 1")
    if header.key_count != header.history_extent + header.query_count:
        raise DumpFormatError(
            f"key_count {keys} != history_extent {history} + query_count {queries}"
        )
    if header.history_extent > header.window_start:
        raise DumpFormatError(
            f"history_extent {history} exceeds window_start {start}"
        )
    return header


def read_dump(path) -> tuple[AttentionTensor, WindowSpec]:
    """Read and fully validate a dump; never returns partially validated data."""
    blob = Path(path).read_bytes()
    header = _parse_header(blob)
    payload = blob[HEADER_SIZE:]
    if len(payload) != header.payload_size:
        raise DumpTruncationError(
            f"payload holds {len(payload)} bytes, header declares {header.payload_size}"
        )
    crc = zlib.crc32(payload, zlib.crc32(blob[: _PREFIX.size]))
    if crc != header.checksum:
        raise DumpCorruptionError(
            f"checksum mismatch: stored {header.checksum:#010x}, computed {crc:#010x}"
        )
    weights = np.frombuffer(payload, dtype="<f4").reshape(
        header.layer_count, header.head_count, header.query_count, header.key_count
    )
    return AttentionTensor(weights.astype(np.float64)), header.window()


def write_manifest(path, names) -> None:
    """Manifest: one relative dump path per line, UTF-8, decode order."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text("".join(f"{n}\n" for n in names), encoding="utf-8")
    os.replace(tmp, path)


def read_manifest(path) -> list[str]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [ln.strip() for ln in lines if ln.strip()]
