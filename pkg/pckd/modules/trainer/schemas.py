"""Trainer module - Run and grid configuration."""

import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator

from pckd.modules.distill import KdMethod, PckdConfig, PckdMethod
from pckd.shared.schemas import BackboneKind

logger = logging.getLogger(__name__)

LR_GRID = (1e-3, 1e-4)
WEIGHT_DECAY_GRID = (1e-3, 1e-4, 1e-5, 0.0)
PATH_FIELDS = ("data", "teacher", "out")


class RunConfig(BaseModel):
    """Everything a teacher or distillation run depends on."""

    # Paths (excluded from the config digest)
    data: Optional[Path] = None
    teacher: Optional[Path] = None
    out: Optional[Path] = None

    # Backbones
    backbone: BackboneKind = BackboneKind.MF
    d_teacher: int = Field(default=64, ge=1)
    d_student: int = Field(default=8, ge=1)
    n_layers: int = Field(default=2, ge=0)

    # Optimization
    lr: float = Field(default=1e-3, gt=0.0)
    weight_decay: float = Field(default=0.0, ge=0.0)
    batch_size: int = Field(default=1024, ge=1)
    max_epochs: int = Field(default=1000, ge=0)
    patience: int = Field(default=30, ge=1)
    seed: int

    # Distillation
    kd_method: KdMethod = KdMethod.DE
    pckd: PckdConfig = Field(default_factory=PckdConfig)
    n_experts: int = Field(default=4, ge=1)
    projector_layers: int = Field(default=2, ge=1)
    temperature_start: float = Field(default=1.0, gt=0.0)
    temperature_end: float = Field(default=0.1, gt=0.0)

    # Evaluation and diagnostics
    Ns: Tuple[int, ...] = (10, 20)
    diagnostics_every: int = Field(default=5, ge=0)
    groupwise_every: int = Field(default=0, ge=0)
    diagnostic_pairs: int = Field(default=100, ge=1)
    diagnostic_cell_pairs: int = Field(default=50, ge=1)
    record_wall_time: bool = True

    @field_validator("Ns", mode="before")
    @classmethod
    def parse_cutoffs(cls, value: Any) -> Any:
        if isinstance(value, str):
            return tuple(int(part) for part in value.split(",") if part.strip())
        return value

    @field_validator("Ns")
    @classmethod
    def cutoffs_positive(cls, value: Tuple[int, ...]) -> Tuple[int, ...]:
        if not value or min(value) < 1:
            raise ValueError("cutoffs must be positive integers")
        return tuple(sorted(set(value)))

    @model_validator(mode="after")
    def consistent(self) -> "RunConfig":
        if self.kd_method == KdMethod.NONE and self.pckd.method != PckdMethod.NONE:
            raise ValueError("PCKD regularizers need a projector; kd_method none allows method none only")
        if self.temperature_end > self.temperature_start:
            raise ValueError("temperature_end must not exceed temperature_start")
        if self.lr not in LR_GRID:
            logger.warning(f"Learning rate {self.lr} is outside the default grid {LR_GRID}")
        if self.weight_decay not in WEIGHT_DECAY_GRID:
            logger.warning(f"Weight decay {self.weight_decay} is outside the default grid {WEIGHT_DECAY_GRID}")
        return self

    @property
    def selection_cutoff(self) -> int:
        """Cutoff used for early stopping and best-model selection (20 when available)."""
        return 20 if 20 in self.Ns else max(self.Ns)


class GridSpec(BaseModel):
    """Cartesian product of ``axes`` over a base config, repeated per seed."""

    base: Dict[str, Any] = Field(default_factory=dict)
    axes: Dict[str, List[Any]] = Field(default_factory=dict)
    seeds: List[int] = Field(default_factory=list)
    data: Optional[Path] = None
    teacher: Optional[Path] = None
    out: Optional[Path] = None
    max_workers: int = Field(default=1, ge=1)

    @field_validator("axes")
    @classmethod
    def axes_nonempty(cls, value: Dict[str, List[Any]]) -> Dict[str, List[Any]]:
        for key, values in value.items():
            if not values:
                raise ValueError(f"grid axis {key} has no values")
        return value
