"""Projectors module - Tagged checkpoint blocks for expert banks.

Each side of the student writes two blocks into the checkpoint's tagged section:

* experts (tag 10 user, 11 item): ``K u32`` then per expert ``n_layers u32`` and per layer
  ``rows u32 | cols u32 | W f32[rows*cols] | b f32[cols]``
* selection (tag 12 user, 13 item): ``rows u32 | cols u32 | W f32 | b f32`` then
  ``temperature_start f64 | temperature_end f64 | anneal_epochs u32``

Float64 checkpoints store W and b as f64.
"""

import struct
from typing import Dict, List, Optional, Tuple

import numpy as np

from pckd.shared.exceptions import CheckpointFormatError, ConfigurationError
from pckd.shared.schemas import Role

from .models import ExpertBank, MlpProjector

USER_EXPERTS_TAG = 10
ITEM_EXPERTS_TAG = 11
USER_SELECTION_TAG = 12
ITEM_SELECTION_TAG = 13

_TAGS = {
    Role.USER: (USER_EXPERTS_TAG, USER_SELECTION_TAG),
    Role.ITEM: (ITEM_EXPERTS_TAG, ITEM_SELECTION_TAG),
}

_U32 = struct.Struct("<I")
_SHAPE = struct.Struct("<II")
_SCHEDULE = struct.Struct("<ddI")
_WIRE = {"float32": "<f4", "float64": "<f8"}


def _wire(dtype: str) -> str:
    if dtype not in _WIRE:
        raise CheckpointFormatError("Unsupported projector dtype", {"dtype": dtype})
    return _WIRE[dtype]


def _pack_layer(weight: np.ndarray, bias: np.ndarray, wire: str) -> bytes:
    rows, cols = weight.shape
    return (
        _SHAPE.pack(rows, cols)
        + np.ascontiguousarray(weight, dtype=wire).tobytes()
        + np.ascontiguousarray(bias, dtype=wire).tobytes()
    )


class _Cursor:
    def __init__(self, data: bytes, tag: int, dtype: str = "float32"):
        self.data = data
        self.tag = tag
        self.offset = 0
        self.dtype = dtype
        self.wire = _wire(dtype)

    def take(self, size: int) -> bytes:
        end = self.offset + size
        if end > len(self.data):
            raise CheckpointFormatError("Projector block is truncated", {"tag": self.tag})
        chunk = self.data[self.offset : end]
        self.offset = end
        return chunk

    def unpack(self, fmt: struct.Struct) -> Tuple:
        return fmt.unpack(self.take(fmt.size))

    def layer(self) -> Tuple[np.ndarray, np.ndarray]:
        rows, cols = self.unpack(_SHAPE)
        width = np.dtype(self.wire).itemsize
        weight = np.frombuffer(self.take(width * rows * cols), dtype=self.wire).reshape(rows, cols)
        bias = np.frombuffer(self.take(width * cols), dtype=self.wire)
        return weight.astype(self.dtype), bias.astype(self.dtype)

    def finish(self) -> None:
        if self.offset != len(self.data):
            raise CheckpointFormatError("Trailing bytes in projector block", {"tag": self.tag})


def encode_bank(bank: ExpertBank, role: Role, dtype: str = "float32") -> Dict[int, bytes]:
    """The two tagged blocks describing ``bank`` for one side."""
    wire = _wire(dtype)
    experts_tag, selection_tag = _TAGS[Role(role)]
    experts = [_U32.pack(bank.n_experts)]
    for expert in bank.experts:
        experts.append(_U32.pack(expert.n_layers))
        experts.extend(_pack_layer(w, b, wire) for w, b in zip(expert.weights, expert.biases))
    selection = _pack_layer(bank.selection_weight, bank.selection_bias, wire) + _SCHEDULE.pack(
        bank.temperature_start, bank.temperature_end, bank.anneal_epochs
    )
    return {experts_tag: b"".join(experts), selection_tag: selection}


def decode_bank(blocks: Dict[int, bytes], role: Role, dtype: str = "float32") -> Optional[ExpertBank]:
    """Rebuild one side's bank; ``None`` when the checkpoint carries no projector blocks."""
    experts_tag, selection_tag = _TAGS[Role(role)]
    if experts_tag not in blocks and selection_tag not in blocks:
        return None
    if experts_tag not in blocks or selection_tag not in blocks:
        raise CheckpointFormatError("Incomplete projector blocks", {"role": Role(role).value})

    cursor = _Cursor(blocks[experts_tag], experts_tag, dtype)
    (n_experts,) = cursor.unpack(_U32)
    if n_experts == 0:
        raise CheckpointFormatError("Projector block has no experts", {"tag": experts_tag})
    experts: List[List[Tuple[np.ndarray, np.ndarray]]] = []
    for _ in range(n_experts):
        (n_layers,) = cursor.unpack(_U32)
        layers = [cursor.layer() for _ in range(n_layers)]
        experts.append(layers)
    cursor.finish()

    cursor = _Cursor(blocks[selection_tag], selection_tag, dtype)
    weight, bias = cursor.layer()
    start, end, anneal = cursor.unpack(_SCHEDULE)
    cursor.finish()
    try:
        projectors = [MlpProjector([w for w, _ in layers], [b for _, b in layers]) for layers in experts]
        return ExpertBank(projectors, weight, bias, start, end, anneal)
    except ConfigurationError as exc:
        raise CheckpointFormatError(f"Inconsistent projector blocks: {exc.message}", {"role": Role(role).value}) from None


def encode_banks(user_bank: ExpertBank, item_bank: ExpertBank, dtype: str = "float32") -> Dict[int, bytes]:
    blocks = encode_bank(user_bank, Role.USER, dtype)
    blocks.update(encode_bank(item_bank, Role.ITEM, dtype))
    return blocks


def decode_banks(
    blocks: Dict[int, bytes], dtype: str = "float32"
) -> Tuple[Optional[ExpertBank], Optional[ExpertBank]]:
    return decode_bank(blocks, Role.USER, dtype), decode_bank(blocks, Role.ITEM, dtype)
