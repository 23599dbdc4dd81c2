"""
Binary checkpoint format.

Layout, little-endian throughout:

    magic        8 bytes  b"RPRCKPT\\0"
    version      u32
    dims         10 x u64 (users, items, f, |P|, |R|, filters, width, d,
                          attention hidden, vocabulary size)
    vocab hash   32 bytes (sha256, zeros when unbound)
    flags        u32      (bit 0: trainable embeddings)
    extra        u64 length + UTF-8 JSON object
    n_params     u32
    per parameter:
        name     u32 length + UTF-8
        rank     u32
        shape    rank x u64
        values   row-major float64
"""

from __future__ import annotations

import json
import logging
import os
import struct
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np

from ..lib.core.errors import ArtifactNotFoundError, CheckpointError
from ..model.params import ModelDims, ModelParams

logger = logging.getLogger(__name__)

MAGIC = b"RPRCKPT\0"
FORMAT_VERSION = 1

_DIM_FIELDS = (
    "n_users",
    "n_items",
    "n_factors",
    "n_preferred",
    "n_rejected",
    "n_filters",
    "filter_width",
    "embedding_dim",
    "attention_hidden",
    "vocab_size",
)


def encode_checkpoint(params: ModelParams) -> bytes:
    parts = [MAGIC, struct.pack("<I", FORMAT_VERSION)]
    dims = (getattr(params.dims, f) for f in _DIM_FIELDS)
    parts.append(struct.pack(f"<{len(_DIM_FIELDS)}Q", *dims))
    digest = bytes.fromhex(params.vocab_digest) if params.vocab_digest else bytes(32)
    parts.append(digest)
    parts.append(struct.pack("<I", int(params.trainable_embeddings)))
    extra = json.dumps(params.extra, sort_keys=True).encode("utf-8")
    parts.append(struct.pack("<Q", len(extra)) + extra)

    parts.append(struct.pack("<I", len(params.arrays)))
    for name, array in params.arrays.items():
        raw = name.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)) + raw)
        parts.append(struct.pack(f"<I{array.ndim}Q", array.ndim, *array.shape))
        parts.append(np.ascontiguousarray(array, dtype="<f8").tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, n: int) -> bytes:
        end = self.offset + n
        if end > len(self.data):
            raise CheckpointError(
                f"checkpoint truncated: needed {n} bytes at offset {self.offset}"
            )
        chunk = self.data[self.offset : end]
        self.offset = end
        return chunk

    def unpack(self, fmt: str) -> Tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def decode_checkpoint(
    data: bytes, expected_digest: Optional[str] = None
) -> ModelParams:
    """
    Parse a checkpoint; never returns a partially read model.

    Raises:
        CheckpointError: bad magic, other format version, truncation,
            trailing bytes, inconsistent shapes or vocabulary hash mismatch
    """
    reader = _Reader(data)
    if reader.take(len(MAGIC)) != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    (version,) = reader.unpack("<I")
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"checkpoint format version {version}, expected {FORMAT_VERSION}"
        )

    dims = ModelDims(*reader.unpack(f"<{len(_DIM_FIELDS)}Q"))
    raw_digest = reader.take(32)
    digest = "" if raw_digest == bytes(32) else raw_digest.hex()
    if expected_digest is not None and digest != expected_digest:
        raise CheckpointError(
            "checkpoint vocabulary hash does not match the corpus vocabulary"
        )
    (flags,) = reader.unpack("<I")
    (extra_len,) = reader.unpack("<Q")
    try:
        extra = json.loads(reader.take(extra_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"checkpoint metadata is corrupt: {e}") from e

    expected = dims.shapes()
    (n_params,) = reader.unpack("<I")
    arrays: Dict[str, np.ndarray] = {}
    for _ in range(n_params):
        (name_len,) = reader.unpack("<I")
        name = reader.take(name_len).decode("utf-8", errors="replace")
        (rank,) = reader.unpack("<I")
        shape = reader.unpack(f"<{rank}Q")
        if expected.get(name) != shape:
            raise CheckpointError(
                f"parameter '{name}' has shape {shape}, header implies "
                f"{expected.get(name)}"
            )
        count = int(np.prod(shape, dtype=np.int64))
        values = np.frombuffer(reader.take(8 * count), dtype="<f8")
        arrays[name] = values.astype(np.float64).reshape(shape)

    if reader.offset != len(data):
        raise CheckpointError(f"{len(data) - reader.offset} trailing bytes")
    if set(arrays) != set(expected):
        missing = sorted(set(expected) - set(arrays))
        raise CheckpointError(f"checkpoint lacks parameters {missing}")

    return ModelParams(
        dims=dims,
        arrays={name: arrays[name] for name in expected},
        vocab_digest=digest,
        trainable_embeddings=bool(flags & 1),
        extra=extra,
    )


def save_checkpoint(params: ModelParams, path: Path) -> None:
    """Write atomically: a temporary sibling is renamed over ``path``"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(encode_checkpoint(params))
    os.replace(tmp, path)
    logger.info(f"Checkpoint written to {path}")


def load_checkpoint(path: Path, expected_digest: Optional[str] = None) -> ModelParams:
    path = Path(path)
    if not path.is_file():
        raise ArtifactNotFoundError(path)
    return decode_checkpoint(path.read_bytes(), expected_digest)
