# modules/infrastructure/io/checkpoint_io.py
"""Self-describing binary checkpoint container.

Layout, all integers little-endian::

    b"HGV1"
    u32  metadata length, then that many bytes of UTF-8 JSON
    u32  tensor count
    per tensor:
      u16 name length, name (UTF-8)
      u8  dtype code, u8 ndim, ndim x u64 shape
      raw little-endian element data
"""
from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, BinaryIO, Dict, Union

import numpy as np
import torch

from modules.errors import CheckpointError

logger = logging.getLogger(__name__)

MAGIC = b"HGV1"

_DTYPE_CODES = {
    np.dtype("<f4"): 1,
    np.dtype("<f8"): 2,
    np.dtype("<i8"): 3,
    np.dtype("bool"): 4,
}
_CODE_DTYPES = {v: k for k, v in _DTYPE_CODES.items()}


@dataclass
class Checkpoint:
    tensors: Dict[str, np.ndarray]
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def epoch(self) -> int:
        return int(self.metadata.get("epoch", 0))

    @property
    def config_hash(self) -> str:
        return str(self.metadata.get("config_hash", ""))


def _to_numpy(value: Union[np.ndarray, torch.Tensor]) -> np.ndarray:
    if isinstance(value, torch.Tensor):
        value = value.detach().cpu().numpy()
    arr = np.asarray(value)
    if arr.dtype == np.bool_:
        return np.ascontiguousarray(arr)
    if arr.dtype.kind == "f":
        return np.ascontiguousarray(arr, dtype=arr.dtype.newbyteorder("<"))
    if arr.dtype.kind in "iu":
        return np.ascontiguousarray(arr, dtype="<i8")
    raise CheckpointError(f"unsupported tensor dtype {arr.dtype}")


def _write(f: BinaryIO, ckpt: Checkpoint) -> None:
    meta = json.dumps(ckpt.metadata, sort_keys=True).encode("utf-8")
    f.write(MAGIC)
    f.write(struct.pack("<I", len(meta)))
    f.write(meta)
    f.write(struct.pack("<I", len(ckpt.tensors)))
    for name, value in ckpt.tensors.items():
        arr = _to_numpy(value)
        code = _DTYPE_CODES.get(arr.dtype)
        if code is None:
            raise CheckpointError(f"unsupported tensor dtype {arr.dtype} for '{name}'")
        raw_name = name.encode("utf-8")
        f.write(struct.pack("<H", len(raw_name)))
        f.write(raw_name)
        f.write(struct.pack("<BB", code, arr.ndim))
        f.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        f.write(arr.tobytes(order="C"))


def save_checkpoint(ckpt: Checkpoint, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as f:
        _write(f, ckpt)
    tmp.replace(path)
    logger.debug("Wrote checkpoint %s (%d tensors)", path, len(ckpt.tensors))
    return path


def _read_exact(f: BinaryIO, n: int, what: str) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise CheckpointError(f"truncated checkpoint while reading {what}")
    return data


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    with open(path, "rb") as f:
        if _read_exact(f, 4, "magic") != MAGIC:
            raise CheckpointError(f"{path} is not an HGV1 checkpoint")
        (meta_len,) = struct.unpack("<I", _read_exact(f, 4, "metadata length"))
        try:
            metadata = json.loads(_read_exact(f, meta_len, "metadata").decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise CheckpointError(f"corrupt checkpoint metadata in {path}: {e}") from e
        (count,) = struct.unpack("<I", _read_exact(f, 4, "tensor count"))
        tensors: Dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", _read_exact(f, 2, "name length"))
            name = _read_exact(f, name_len, "tensor name").decode("utf-8")
            code, ndim = struct.unpack("<BB", _read_exact(f, 2, f"header of '{name}'"))
            dtype = _CODE_DTYPES.get(code)
            if dtype is None:
                raise CheckpointError(f"unknown dtype code {code} for '{name}'")
            shape = struct.unpack(f"<{ndim}Q", _read_exact(f, 8 * ndim, f"shape of '{name}'"))
            n_bytes = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
            buf = _read_exact(f, n_bytes, f"data of '{name}'")
            tensors[name] = np.frombuffer(buf, dtype=dtype).reshape(shape).copy()
    return Checkpoint(tensors=tensors, metadata=metadata)
