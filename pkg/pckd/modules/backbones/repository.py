"""Backbones module - Binary checkpoint files.

Layout (little-endian)::

    magic "PKDC" | version u32 | kind u8 | n_users u64 | n_items u64 | d u32 | L u32
    user embeddings f32[n_users*d] | item embeddings f32[n_items*d]
    seed u64 | config digest 32 bytes
    then zero or more tagged blocks: tag u8 | length u64 | payload[length]

Float64 runs write version 2: the same layout with an element width u8 (8) after L,
and f64 embeddings and projector blocks.
"""

import logging
import struct
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np

from pckd.shared.exceptions import CheckpointFormatError
from pckd.shared.files import atomic_write_bytes
from pckd.shared.schemas import BackboneKind

from .models import Checkpoint, GcnModel, MfModel

logger = logging.getLogger(__name__)

MAGIC = b"PKDC"
FORMAT_VERSION = 1
WIDE_FORMAT_VERSION = 2
DIGEST_SIZE = 32
_HEADER = struct.Struct("<4sIBQQII")
_WIDTH = struct.Struct("<B")
_TRAILER = struct.Struct("<Q")
_BLOCK = struct.Struct("<BQ")

# element width in bytes -> (numpy dtype name, little-endian wire dtype)
DTYPES = {4: ("float32", "<f4"), 8: ("float64", "<f8")}

PathLike = Union[str, Path]


def encode_checkpoint(
    model: Union[MfModel, GcnModel],
    seed: int,
    config_digest: bytes,
    blocks: Optional[Dict[int, bytes]] = None,
) -> bytes:
    """Serialize a model and optional tagged blocks (written in ascending tag order)."""
    if len(config_digest) != DIGEST_SIZE:
        raise CheckpointFormatError("Config digest must be 32 bytes", {"size": len(config_digest)})
    width = 8 if np.asarray(model.user_emb).dtype == np.float64 else 4
    version = WIDE_FORMAT_VERSION if width == 8 else FORMAT_VERSION
    wire = DTYPES[width][1]
    parts = [
        _HEADER.pack(MAGIC, version, model.kind.tag, model.n_users, model.n_items, model.dim, model.n_layers),
        _WIDTH.pack(width) if version == WIDE_FORMAT_VERSION else b"",
        np.ascontiguousarray(model.user_emb, dtype=wire).tobytes(),
        np.ascontiguousarray(model.item_emb, dtype=wire).tobytes(),
        _TRAILER.pack(seed & 0xFFFFFFFFFFFFFFFF),
        bytes(config_digest),
    ]
    for tag in sorted(blocks or {}):
        payload = blocks[tag]
        parts.append(_BLOCK.pack(tag, len(payload)))
        parts.append(payload)
    return b"".join(parts)


class _Reader:
    """Bounds-checked cursor over checkpoint bytes."""

    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, size: int, what: str) -> bytes:
        end = self.offset + size
        if end > len(self.data):
            raise CheckpointFormatError("Checkpoint file is truncated", {"section": what})
        chunk = self.data[self.offset : end]
        self.offset = end
        return chunk

    @property
    def remaining(self) -> int:
        return len(self.data) - self.offset


def decode_checkpoint(
    data: bytes,
    expected_kind: Optional[BackboneKind] = None,
    expected_dim: Optional[int] = None,
) -> Checkpoint:
    """Parse checkpoint bytes; any inconsistency raises ``CheckpointFormatError``."""
    reader = _Reader(data)
    magic, version, kind_tag, n_users, n_items, dim, n_layers = _HEADER.unpack(reader.take(_HEADER.size, "header"))
    if magic != MAGIC:
        raise CheckpointFormatError("Not a checkpoint file (bad magic)")
    if version not in (FORMAT_VERSION, WIDE_FORMAT_VERSION):
        raise CheckpointFormatError("Unsupported checkpoint version", {"version": version})
    width = 4
    if version == WIDE_FORMAT_VERSION:
        (width,) = _WIDTH.unpack(reader.take(_WIDTH.size, "element width"))
        if width not in DTYPES:
            raise CheckpointFormatError("Unsupported element width", {"width": width})
    dtype, wire = DTYPES[width]
    try:
        kind = BackboneKind.from_tag(kind_tag)
    except ValueError:
        raise CheckpointFormatError("Unknown backbone kind", {"tag": kind_tag}) from None
    if expected_kind is not None and kind != expected_kind:
        raise CheckpointFormatError(
            "Checkpoint kind mismatch",
            {"expected": expected_kind.value, "found": kind.value},
        )
    if expected_dim is not None and dim != expected_dim:
        raise CheckpointFormatError("Checkpoint dimension mismatch", {"expected": expected_dim, "found": dim})

    user_emb = np.frombuffer(reader.take(width * n_users * dim, "user embeddings"), dtype=wire).reshape(n_users, dim)
    item_emb = np.frombuffer(reader.take(width * n_items * dim, "item embeddings"), dtype=wire).reshape(n_items, dim)
    (seed,) = _TRAILER.unpack(reader.take(_TRAILER.size, "seed"))
    digest = reader.take(DIGEST_SIZE, "config digest")

    blocks: Dict[int, bytes] = {}
    while reader.remaining:
        tag, length = _BLOCK.unpack(reader.take(_BLOCK.size, "block header"))
        blocks[tag] = reader.take(length, f"block {tag}")

    return Checkpoint(
        kind=kind,
        n_users=n_users,
        n_items=n_items,
        dim=dim,
        n_layers=n_layers,
        user_emb=user_emb.astype(dtype),
        item_emb=item_emb.astype(dtype),
        seed=seed,
        config_digest=digest,
        blocks=blocks,
        dtype=dtype,
    )


class CheckpointRepository:
    """Save and load checkpoint files atomically."""

    def save(
        self,
        path: PathLike,
        model: Union[MfModel, GcnModel],
        seed: int,
        config_digest: bytes,
        blocks: Optional[Dict[int, bytes]] = None,
    ) -> Path:
        target = atomic_write_bytes(path, encode_checkpoint(model, seed, config_digest, blocks))
        logger.debug(f"Wrote {model.kind.value} checkpoint to {target}")
        return target

    def load(
        self,
        path: PathLike,
        expected_kind: Optional[BackboneKind] = None,
        expected_dim: Optional[int] = None,
    ) -> Checkpoint:
        source = Path(path)
        if not source.is_file():
            raise CheckpointFormatError("Checkpoint file not found", {"path": str(source)})
        return decode_checkpoint(source.read_bytes(), expected_kind, expected_dim)


def save_checkpoint(path: PathLike, model, seed: int = 0, config_digest: bytes = bytes(DIGEST_SIZE), blocks=None) -> Path:
    return CheckpointRepository().save(path, model, seed, config_digest, blocks)


def load_checkpoint(path: PathLike, expected_kind: Optional[BackboneKind] = None, expected_dim: Optional[int] = None) -> Checkpoint:
    return CheckpointRepository().load(path, expected_kind, expected_dim)
