"""Data module - Interaction ingestion, filtering, chronological splits and batching."""

from .models import BprBatch, Dataset, IdMaps, Interaction, InteractionLog, SplitRecords
from .repository import DatasetRepository, load_interactions, save_interactions
from .schemas import DataConfig, SplitMode, SyntheticConfig
from .service import (
    chrono_split,
    generate_synthetic,
    iterate_epoch,
    preprocess,
    sample_bpr_batch,
)

__all__ = [
    "BprBatch",
    "Dataset",
    "IdMaps",
    "Interaction",
    "InteractionLog",
    "SplitRecords",
    "DatasetRepository",
    "load_interactions",
    "save_interactions",
    "DataConfig",
    "SplitMode",
    "SyntheticConfig",
    "chrono_split",
    "generate_synthetic",
    "iterate_epoch",
    "preprocess",
    "sample_bpr_batch",
]
