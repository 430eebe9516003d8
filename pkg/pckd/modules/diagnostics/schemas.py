"""Diagnostics module - Inconsistency report."""

from typing import List, Optional

from pydantic import BaseModel, Field

GROUP_LABELS = ("g1", "g2", "g3", "g4", "g5")


class InconsistencyReport(BaseModel):
    """Sampled preference inconsistency of a projected scorer."""

    epoch: int = 0
    C: float = Field(ge=0.0, le=1.0)
    per_user: List[float] = Field(default_factory=list)
    pairs_per_user: int = Field(ge=1)
    groupwise: Optional[List[List[float]]] = None
    pairs_per_cell: Optional[int] = None
