"""Data module - Validated configuration for ingestion and splitting."""

from enum import Enum
from typing import Tuple

from pydantic import BaseModel, Field, field_validator


class SplitMode(str, Enum):
    """Chronological split granularity."""

    GLOBAL = "global"
    PER_USER = "per_user"


class DataConfig(BaseModel):
    """Preprocessing and split options."""

    min_interactions: int = Field(default=10, ge=1)
    ratios: Tuple[float, float, float] = (0.8, 0.1, 0.1)
    split_mode: SplitMode = SplitMode.GLOBAL

    @field_validator("ratios")
    @classmethod
    def ratios_sum_to_one(cls, value: Tuple[float, float, float]) -> Tuple[float, float, float]:
        if any(r < 0 for r in value) or abs(sum(value) - 1.0) > 1e-9:
            raise ValueError("ratios must be nonnegative and sum to 1")
        return value


class SyntheticConfig(BaseModel):
    """Parameters of the latent-factor synthetic generator."""

    n_users: int = Field(default=200, ge=1)
    n_items: int = Field(default=500, ge=1)
    latent_dim: int = Field(default=16, ge=1)
    density: float = Field(default=0.02, gt=0.0, lt=1.0)
    seed: int = 0
