"""Distill module - Rank table, sampled item sets and loss containers."""

from dataclasses import dataclass, field
from typing import Dict, NamedTuple

import numpy as np


@dataclass(frozen=True)
class RankTable:
    """Per-user item order by descending student score (ties by ascending item index)."""

    order: np.ndarray
    built_at_epoch: int = 0

    @property
    def n_users(self) -> int:
        return int(self.order.shape[0])

    @property
    def n_items(self) -> int:
        return int(self.order.shape[1])

    def items_at(self, users: np.ndarray, ranks: np.ndarray) -> np.ndarray:
        """Items at 0-based ``ranks`` (one row of ranks per user)."""
        users = np.asarray(users, dtype=np.int64)
        return self.order[users.reshape(-1, *([1] * (np.ndim(ranks) - 1))), ranks]


class PairSample(NamedTuple):
    """One ``(u, i, j)`` pair per row; i is the item expected to rank higher."""

    users: np.ndarray
    first: np.ndarray
    second: np.ndarray


class ListSample(NamedTuple):
    """One Q-item set per row."""

    users: np.ndarray
    items: np.ndarray


class LossValue(NamedTuple):
    """A scalar loss with gradients keyed by the array each one belongs to."""

    value: float
    grads: Dict[str, np.ndarray]


@dataclass
class BatchLosses:
    """Per-batch components of the joint objective and the gradient of their weighted sum."""

    base: float
    de: float = 0.0
    pckd: float = 0.0
    total: float = 0.0
    grads: Dict[str, np.ndarray] = field(default_factory=dict)
