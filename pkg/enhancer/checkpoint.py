"""
Binary checkpoint format.

    "AVSM" | u32 version | u32 n + n bytes canonical JSON header | u64 step | u32 tensor count
    per tensor: u32 n + n bytes utf-8 name | u8 dtype tag | u32 rank | rank x u32 dims | payload
    u32 CRC32 of every preceding byte

All integers and payloads are little-endian. Tensors are written in sorted name order,
so encoding the same checkpoint twice gives the same bytes.
"""
import json
import logging
import os
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from autodiff.optim import AdamWState
from autodiff.tensor import Tensor
from utils.canonical_json import dumps_canonical
from utils.exceptions import ConfigError, CorruptFile, FileError, VersionMismatch
from .config import ModelConfig

logger = logging.getLogger("avsem")

MAGIC = b"AVSM"
CHECKPOINT_VERSION = 1
OPTIMIZER_PREFIXES = ("adamw.m.", "adamw.v.")

_DTYPE_TAGS = {np.dtype("<f4"): 1, np.dtype("<f8"): 2}
_TAG_DTYPES = {tag: dtype for dtype, tag in _DTYPE_TAGS.items()}


@dataclass(eq=False)
class Checkpoint:
    config: ModelConfig
    params: Dict[str, Tensor]
    step: int = 0
    optimizer: Optional[AdamWState] = None
    version: int = CHECKPOINT_VERSION


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.offset = 0

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.offset + size > len(self.blob):
            raise CorruptFile("checkpoint ends inside a record")
        values = struct.unpack_from(fmt, self.blob, self.offset)
        self.offset += size
        return values

    def raw(self, size: int) -> bytes:
        if self.offset + size > len(self.blob):
            raise CorruptFile("checkpoint ends inside a record")
        chunk = self.blob[self.offset:self.offset + size]
        self.offset += size
        return chunk


def _tensor_record(name: str, array: np.ndarray) -> bytes:
    array = np.asarray(array)
    dtype = array.dtype.newbyteorder("<")
    if dtype not in _DTYPE_TAGS:
        raise ConfigError(f"tensor {name} has unsupported dtype {array.dtype}")
    encoded = name.encode("utf-8")
    parts = [
        struct.pack("<I", len(encoded)),
        encoded,
        struct.pack("<BI", _DTYPE_TAGS[dtype], array.ndim),
        struct.pack(f"<{array.ndim}I", *array.shape),
        np.ascontiguousarray(array, dtype=dtype).tobytes(),
    ]
    return b"".join(parts)


def encode_checkpoint(checkpoint: Checkpoint) -> bytes:
    tensors = {name: tensor.data for name, tensor in checkpoint.params.items()}
    optimizer_step = None
    if checkpoint.optimizer is not None:
        optimizer_step = checkpoint.optimizer.step
        for name, moment in checkpoint.optimizer.m.items():
            tensors[f"adamw.m.{name}"] = moment
        for name, moment in checkpoint.optimizer.v.items():
            tensors[f"adamw.v.{name}"] = moment

    header = dumps_canonical({"model": checkpoint.config.to_dict(), "optimizer_step": optimizer_step}).encode("utf-8")
    body = [
        MAGIC,
        struct.pack("<II", CHECKPOINT_VERSION, len(header)),
        header,
        struct.pack("<QI", checkpoint.step, len(tensors)),
    ]
    body.extend(_tensor_record(name, tensors[name]) for name in sorted(tensors))
    blob = b"".join(body)
    return blob + struct.pack("<I", zlib.crc32(blob) & 0xFFFFFFFF)


def decode_checkpoint(blob: bytes) -> Checkpoint:
    if len(blob) < 12 or blob[:4] != MAGIC:
        raise CorruptFile("not a checkpoint file (bad magic)")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != CHECKPOINT_VERSION:
        raise VersionMismatch(f"checkpoint version {version}, this build reads {CHECKPOINT_VERSION}")
    (stored_crc,) = struct.unpack_from("<I", blob, len(blob) - 4)
    if zlib.crc32(blob[:-4]) & 0xFFFFFFFF != stored_crc:
        raise CorruptFile("checkpoint checksum mismatch")

    reader = _Reader(blob[:-4])
    reader.offset = 8
    (header_len,) = reader.take("<I")
    try:
        header = json.loads(reader.raw(header_len).decode("utf-8"))
        config = ModelConfig.from_dict(header["model"])
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError, ConfigError) as exc:
        raise CorruptFile(f"unreadable checkpoint header: {exc}") from exc
    step, count = reader.take("<QI")

    tensors = {}
    for _ in range(count):
        (name_len,) = reader.take("<I")
        name = reader.raw(name_len).decode("utf-8", errors="strict")
        tag, rank = reader.take("<BI")
        if tag not in _TAG_DTYPES:
            raise CorruptFile(f"tensor {name} has unknown dtype tag {tag}")
        shape = reader.take(f"<{rank}I")
        dtype = _TAG_DTYPES[tag]
        payload = reader.raw(int(np.prod(shape, dtype=np.int64)) * dtype.itemsize)
        if name in tensors:
            raise CorruptFile(f"tensor {name} appears twice")
        tensors[name] = np.frombuffer(payload, dtype=dtype).reshape(shape).astype(dtype.newbyteorder("="))
    if reader.offset != len(reader.blob):
        raise CorruptFile("trailing bytes after the last tensor")

    params = {}
    optimizer = None
    if header.get("optimizer_step") is not None:
        optimizer = AdamWState(step=int(header["optimizer_step"]))
    for name, array in tensors.items():
        if name.startswith(OPTIMIZER_PREFIXES):
            if optimizer is None:
                raise CorruptFile(f"optimizer tensor {name} without optimizer state")
            moments = optimizer.m if name.startswith("adamw.m.") else optimizer.v
            moments[name[len("adamw.m."):]] = array
        else:
            params[name] = Tensor(array, requires_grad=True, name=name)
    return Checkpoint(config=config, params=params, step=step, optimizer=optimizer, version=version)


def save_checkpoint(path, checkpoint: Checkpoint) -> Path:
    """Writes atomically: the bytes land in a sibling temp file that is then renamed over `path`."""
    path = Path(path)
    blob = encode_checkpoint(checkpoint)
    tmp = path.with_name(path.name + ".tmp")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp.write_bytes(blob)
        os.replace(tmp, path)
    except OSError as exc:
        raise FileError(f"cannot write checkpoint {path}: {exc}") from exc
    logger.info(f"saved checkpoint {path} (step {checkpoint.step}, {len(checkpoint.params)} tensors)")
    return path


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise FileError(f"cannot read checkpoint {path}: {exc}") from exc
    return decode_checkpoint(blob)
