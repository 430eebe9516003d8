"""Trainer module - Teacher pretraining, the distillation loop and experiment grids."""

from .models import RUN_LOG_COLUMNS, EpochRecord, RunLog, RunOutcome
from .repository import (
    build_run_config,
    config_digest,
    merge_config,
    method_overrides,
    read_config_file,
    read_grid_spec,
    read_run_log,
    write_manifest,
    write_run_log,
)
from .schemas import GridSpec, RunConfig
from .service import TrainerService, grid_cells

__all__ = [
    "RUN_LOG_COLUMNS",
    "EpochRecord",
    "RunLog",
    "RunOutcome",
    "build_run_config",
    "config_digest",
    "merge_config",
    "method_overrides",
    "read_config_file",
    "read_grid_spec",
    "read_run_log",
    "write_manifest",
    "write_run_log",
    "GridSpec",
    "RunConfig",
    "TrainerService",
    "grid_cells",
]
