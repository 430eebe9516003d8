"""Evaluation module - Full-ranking Recall@N / NDCG@N and early stopping."""

import logging
from typing import Sequence, Union

import numpy as np

from pckd.modules.backbones import GcnModel, MfModel, score_matrix
from pckd.modules.data import Dataset
from pckd.shared.exceptions import ConfigurationError, DomainError
from pckd.shared.schemas import Split

from .schemas import EvalResult, MetricPair, StopDecision

logger = logging.getLogger(__name__)

Model = Union[MfModel, GcnModel]


def _masked_scores(model: Model, dataset: Dataset, split: Split) -> np.ndarray:
    scores = score_matrix(model)
    masks = [dataset.train_records]
    if split == Split.TEST:
        masks.append(dataset.val_records)
    for records in masks:
        scores[records.users, records.items] = -np.inf
    return scores


def ranking_metrics(ranked: np.ndarray, truth: np.ndarray, n: int) -> MetricPair:
    """Recall and NDCG of one ranked list (best first) against a ground-truth set."""
    hits = np.isin(ranked[:n], truth).astype(np.float64)
    discounts = 1.0 / np.log2(np.arange(2, hits.size + 2))
    ideal = np.sum(1.0 / np.log2(np.arange(2, min(n, truth.size) + 2)))
    return MetricPair(
        recall=float(hits.sum() / truth.size),
        ndcg=min(float(hits @ discounts / ideal), 1.0) if ideal > 0 else 0.0,
    )


def evaluate(model: Model, dataset: Dataset, split: Union[Split, str], Ns: Sequence[int] = (10, 20)) -> EvalResult:
    """
    Rank every item for every user with ground truth in ``split``.

    Training positives are masked (and validation positives too when ``split`` is test);
    score ties go to the lower item index.
    """
    split = Split(split)
    Ns = sorted({int(n) for n in Ns})
    if not Ns or Ns[0] < 1:
        raise ConfigurationError("Cutoffs must be positive integers", {"Ns": Ns})
    truth = dataset.split(split.value)
    users = [u for u in range(dataset.n_users) if truth[u].size]
    if not users:
        raise DomainError(f"The {split.value} split has no ground truth")

    scores = _masked_scores(model, dataset, split)
    depth = min(Ns[-1], dataset.n_items)
    ranked = np.argsort(-scores[users], axis=1, kind="stable")[:, :depth]

    totals = {n: np.zeros(2) for n in Ns}
    for row, user in enumerate(users):
        for n in Ns:
            pair = ranking_metrics(ranked[row], truth[user], n)
            totals[n] += (pair.recall, pair.ndcg)
    metrics = {n: MetricPair(recall=t[0] / len(users), ndcg=t[1] / len(users)) for n, t in totals.items()}
    return EvalResult(split=split.value, metrics=metrics, n_users_evaluated=len(users))


class EarlyStopTracker:
    """Stops after ``patience`` consecutive epochs without a strict improvement."""

    def __init__(self, patience: int = 30):
        if patience < 1:
            raise ConfigurationError("patience must be at least 1", {"patience": patience})
        self.patience = patience
        self.best = -np.inf
        self.best_epoch = -1
        self.stale = 0
        self.epoch = -1

    def update(self, value: float) -> StopDecision:
        self.epoch += 1
        is_best = value > self.best
        if is_best:
            self.best = float(value)
            self.best_epoch = self.epoch
            self.stale = 0
        else:
            self.stale += 1
        return StopDecision(
            stop=self.stale >= self.patience,
            is_best=is_best,
            best=self.best,
            epochs_without_improvement=self.stale,
        )
