"""Trainer module - Run log and run outcomes."""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np

from pckd.modules.backbones import Checkpoint, GcnModel, MfModel
from pckd.modules.evaluation import EvalResult
from pckd.modules.projectors import ExpertBank
from pckd.shared.exceptions import ConfigurationError

Model = Union[MfModel, GcnModel]

RUN_LOG_COLUMNS = ["epoch", "loss_base", "loss_de", "loss_pckd", "val_ndcg20", "C", "seconds"]


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    loss_base: float
    loss_de: float
    loss_pckd: float
    val_ndcg20: float
    C: Optional[float] = None
    seconds: float = 0.0


@dataclass
class RunLog:
    """Append-only per-epoch records."""

    records: List[EpochRecord] = field(default_factory=list)
    groupwise: Dict[int, np.ndarray] = field(default_factory=dict)

    def append(self, record: EpochRecord) -> None:
        if self.records and record.epoch <= self.records[-1].epoch:
            raise ConfigurationError("Run log epochs must increase", {"epoch": record.epoch})
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def last_c(self) -> Optional[float]:
        for record in reversed(self.records):
            if record.C is not None:
                return record.C
        return None


@dataclass
class RunOutcome:
    """What a teacher or distillation run produced."""

    model: Model
    checkpoint: Checkpoint
    run_log: RunLog
    best_epoch: int
    best_val: float
    test: Optional[EvalResult] = None
    final_c: Optional[float] = None
    user_bank: Optional[ExpertBank] = None
    item_bank: Optional[ExpertBank] = None
    rank_rebuilds: List[int] = field(default_factory=list)
    checkpoint_path: Optional[Path] = None
