"""Evaluation module - Metric results and early-stopping decisions."""

from typing import Dict

from pydantic import BaseModel, Field


class MetricPair(BaseModel):
    recall: float = Field(ge=0.0, le=1.0)
    ndcg: float = Field(ge=0.0, le=1.0)


class EvalResult(BaseModel):
    """Average Recall@N and NDCG@N over users with nonempty ground truth."""

    split: str
    metrics: Dict[int, MetricPair]
    n_users_evaluated: int = Field(ge=0)

    def recall(self, n: int) -> float:
        return self.metrics[n].recall

    def ndcg(self, n: int) -> float:
        return self.metrics[n].ndcg

    def as_lines(self) -> str:
        """``recall@10=...`` style key=value lines."""
        lines = []
        for n in sorted(self.metrics):
            lines.append(f"recall@{n}={self.metrics[n].recall:.6f}")
            lines.append(f"ndcg@{n}={self.metrics[n].ndcg:.6f}")
        lines.append(f"users={self.n_users_evaluated}")
        return "\n".join(lines)


class StopDecision(BaseModel):
    stop: bool
    is_best: bool
    best: float
    epochs_without_improvement: int
