"""Distill module - Regularizer configuration."""

from enum import Enum

from pydantic import BaseModel, Field, model_validator


class KdMethod(str, Enum):
    """How student features are aligned with the teacher."""

    NONE = "none"  # no projector, base loss only
    FITNET = "fitnet"  # one MLP projector per side
    DE = "de"  # K experts plus selection network per side


class PckdMethod(str, Enum):
    """Preference-consistency regularizer added on top of the projector loss."""

    NONE = "none"
    PCKD_P = "pckd_p"
    PCKD_L = "pckd_l"
    PCKD_H = "pckd_h"


class SamplingMode(str, Enum):
    RANK_AWARE = "rank_aware"
    RANDOM = "random"


class Reduction(str, Enum):
    """How a PCKD regularizer aggregates its per-user terms."""

    MEAN = "mean"
    SUM = "sum"  # same scale as the summed feature-distillation loss


class HybridSampling(str, Enum):
    """Pair sampling inside the hybrid loss."""

    MODIFIED = "modified"  # first item at T1, second at T2
    VANILLA = "vanilla"  # both items at T


class PckdConfig(BaseModel):
    """Hyperparameters of the projector loss and the PCKD regularizers."""

    method: PckdMethod = PckdMethod.NONE
    T: float = Field(default=10.0, gt=0.0)
    T1: float = Field(default=1.0, gt=0.0)
    T2: float = Field(default=100.0, gt=0.0)
    Q: int = Field(default=10, ge=2)
    alpha: float = Field(default=0.5, ge=0.0, le=1.0)
    lambda_de: float = Field(default=0.01, ge=0.0)
    lambda_pckd: float = Field(default=5e-3, ge=0.0)
    sampling_mode: SamplingMode = SamplingMode.RANK_AWARE
    rank_refresh_K: int = Field(default=5, ge=1)
    hybrid_sampling: HybridSampling = HybridSampling.MODIFIED
    reduction: Reduction = Reduction.MEAN
    detach_targets: bool = True
    fd_squared: bool = True

    @model_validator(mode="after")
    def hybrid_temperatures_ordered(self) -> "PckdConfig":
        if self.method == PckdMethod.PCKD_H and self.hybrid_sampling == HybridSampling.MODIFIED and not self.T1 < self.T2:
            raise ValueError("hybrid sampling requires T1 < T2")
        return self

    @property
    def pair_temperatures(self) -> "tuple[float, float]":
        """Temperatures for the first and second item of a PCKD-P pair."""
        if self.method == PckdMethod.PCKD_H and self.hybrid_sampling == HybridSampling.MODIFIED:
            return self.T1, self.T2
        return self.T, self.T
