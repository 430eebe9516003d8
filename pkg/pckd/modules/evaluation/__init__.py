"""Evaluation module - Full-ranking top-N metrics."""

from .repository import append_metrics, metric_rows
from .schemas import EvalResult, MetricPair, StopDecision
from .service import EarlyStopTracker, evaluate, ranking_metrics

__all__ = [
    "append_metrics",
    "metric_rows",
    "EvalResult",
    "MetricPair",
    "StopDecision",
    "EarlyStopTracker",
    "evaluate",
    "ranking_metrics",
]
