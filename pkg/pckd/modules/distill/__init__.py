"""Distill module - Base, feature-distillation and preference-consistency losses."""

from .losses import bpr_loss, combine, de_loss, fd_loss, pckd_h_loss, pckd_l_loss, pckd_p_loss, total_loss
from .models import BatchLosses, ListSample, LossValue, PairSample, RankTable
from .sampling import (
    rank_aware_sample,
    rank_log_weights,
    rank_probabilities,
    rebuild_rank_table,
    sample_lists,
    sample_pairs,
    sample_ranks,
)
from .schemas import HybridSampling, KdMethod, PckdConfig, PckdMethod, Reduction, SamplingMode
from .service import DistillationObjective

__all__ = [
    "bpr_loss",
    "combine",
    "de_loss",
    "fd_loss",
    "pckd_h_loss",
    "pckd_l_loss",
    "pckd_p_loss",
    "total_loss",
    "BatchLosses",
    "ListSample",
    "LossValue",
    "PairSample",
    "RankTable",
    "rank_aware_sample",
    "rank_log_weights",
    "rank_probabilities",
    "rebuild_rank_table",
    "sample_lists",
    "sample_pairs",
    "sample_ranks",
    "HybridSampling",
    "KdMethod",
    "PckdConfig",
    "PckdMethod",
    "Reduction",
    "SamplingMode",
    "DistillationObjective",
]
