"""Projectors module - Student-to-teacher feature projectors and DE expert banks."""

from .models import DeCache, ExpertBank, MlpCache, MlpProjector, SelectionCache, gumbel_temperature
from .repository import decode_bank, decode_banks, encode_bank, encode_banks
from .service import (
    de_backward,
    de_project,
    de_select,
    identity_projector,
    init_bank,
    init_mlp,
    project,
    wrap_single,
)

__all__ = [
    "DeCache",
    "ExpertBank",
    "MlpCache",
    "MlpProjector",
    "SelectionCache",
    "gumbel_temperature",
    "decode_bank",
    "decode_banks",
    "encode_bank",
    "encode_banks",
    "de_backward",
    "de_project",
    "de_select",
    "identity_projector",
    "init_bank",
    "init_mlp",
    "project",
    "wrap_single",
]
