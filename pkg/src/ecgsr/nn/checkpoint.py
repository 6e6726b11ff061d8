"""Binary parameter checkpoints.

Layout (all integers little-endian)::

    magic      8 bytes   b"ECGSRCKP"
    version    u32       1
    meta_len   u32       length of the UTF-8 JSON metadata that follows
    meta       bytes     free-form JSON (model config etc.), sorted keys
    count      u32       number of tensors
    per tensor:
      name_len u16, name UTF-8
      ndim     u8, dims u32 x ndim
      data     float64 little-endian, C order
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Mapping

import numpy as np

from ..errors import EcgsrError

MAGIC = b"ECGSRCKP"
VERSION = 1


class CheckpointError(EcgsrError, ValueError):
    pass


def dumps(params: Mapping[str, np.ndarray], meta: dict | None = None) -> bytes:
    meta_bytes = json.dumps(meta or {}, sort_keys=True, separators=(",", ":")).encode()
    parts = [MAGIC, struct.pack("<II", VERSION, len(meta_bytes)), meta_bytes, struct.pack("<I", len(params))]
    for name, arr in params.items():
        arr = np.array(arr, dtype="<f8", order="C")  # ascontiguousarray would promote 0-d to 1-d
        nb = name.encode()
        parts.append(struct.pack("<H", len(nb)) + nb)
        parts.append(struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.tobytes())
    return b"".join(parts)


def loads(blob: bytes) -> tuple[dict[str, np.ndarray], dict]:
    if blob[:8] != MAGIC:
        raise CheckpointError("BAD_CHECKPOINT", "bad magic")
    try:
        version, meta_len = struct.unpack_from("<II", blob, 8)
        if version != VERSION:
            raise CheckpointError("BAD_CHECKPOINT", f"unsupported version {version}")
        pos = 16
        meta = json.loads(blob[pos:pos + meta_len].decode())
        pos += meta_len
        (count,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        params = {}
        for _ in range(count):
            (nlen,) = struct.unpack_from("<H", blob, pos)
            pos += 2
            name = blob[pos:pos + nlen].decode()
            pos += nlen
            (ndim,) = struct.unpack_from("<B", blob, pos)
            pos += 1
            shape = struct.unpack_from(f"<{ndim}I", blob, pos)
            pos += 4 * ndim
            size = int(np.prod(shape, dtype=np.int64)) * 8
            if pos + size > len(blob):
                raise CheckpointError("BAD_CHECKPOINT", f"truncated tensor {name!r}")
            params[name] = np.frombuffer(blob, dtype="<f8", count=size // 8, offset=pos).reshape(shape).copy()
            pos += size
    except (struct.error, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError("BAD_CHECKPOINT", str(exc)) from exc
    if pos != len(blob):
        raise CheckpointError("BAD_CHECKPOINT", "trailing bytes")
    return params, meta


def save(path: str | Path, params: Mapping[str, np.ndarray], meta: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(dumps(params, meta))
    return path


def load(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError("MISSING_CHECKPOINT", f"cannot read checkpoint {path}") from exc
    return loads(blob)
