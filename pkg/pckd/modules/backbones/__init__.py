"""Backbones module - BPRMF and LightGCN students/teachers with checkpoint files."""

from .models import Checkpoint, GcnModel, MfModel, build_normalized_adjacency
from .repository import (
    CheckpointRepository,
    decode_checkpoint,
    encode_checkpoint,
    load_checkpoint,
    save_checkpoint,
)
from .service import (
    Model,
    backward_into_embeddings,
    check_matches_dataset,
    features,
    init_model,
    model_from_checkpoint,
    score,
    score_all_items,
    score_matrix,
)

__all__ = [
    "Checkpoint",
    "GcnModel",
    "MfModel",
    "Model",
    "build_normalized_adjacency",
    "CheckpointRepository",
    "decode_checkpoint",
    "encode_checkpoint",
    "load_checkpoint",
    "save_checkpoint",
    "backward_into_embeddings",
    "check_matches_dataset",
    "features",
    "init_model",
    "model_from_checkpoint",
    "score",
    "score_all_items",
    "score_matrix",
]
