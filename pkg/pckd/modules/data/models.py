"""Data module - In-memory interaction log and dataset containers."""

from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Tuple

import numpy as np


class Interaction(NamedTuple):
    """One raw event."""

    user: str
    item: str
    timestamp: int


@dataclass(frozen=True)
class InteractionLog:
    """Ordered raw interaction records."""

    records: Tuple[Interaction, ...]

    def __len__(self) -> int:
        return len(self.records)

    @classmethod
    def from_records(cls, records) -> "InteractionLog":
        return cls(tuple(Interaction(str(u), str(i), int(t)) for u, i, t in records))


@dataclass(frozen=True)
class IdMaps:
    """Raw-to-dense id maps; dense ids are assigned in first-appearance order."""

    users: Dict[str, int]
    items: Dict[str, int]


@dataclass(frozen=True)
class SplitRecords:
    """Dense ``(user, item, timestamp)`` rows of one split, in chronological order."""

    users: np.ndarray
    items: np.ndarray
    timestamps: np.ndarray

    def __len__(self) -> int:
        return int(self.users.size)

    @classmethod
    def empty(cls) -> "SplitRecords":
        zeros = np.zeros(0, dtype=np.int64)
        return cls(zeros, zeros.copy(), zeros.copy())

    def per_user(self, n_users: int) -> List[np.ndarray]:
        """Sorted positive-item arrays indexed by dense user id."""
        order = np.lexsort((self.items, self.users))
        users = self.users[order]
        items = self.items[order]
        bounds = np.searchsorted(users, np.arange(n_users + 1))
        return [items[bounds[u] : bounds[u + 1]].copy() for u in range(n_users)]


@dataclass(frozen=True)
class Dataset:
    """Filtered, id-remapped, chronologically split interactions."""

    n_users: int
    n_items: int
    train_records: SplitRecords
    val_records: SplitRecords
    test_records: SplitRecords
    id_maps: IdMaps
    ratios: Tuple[float, float, float] = (0.8, 0.1, 0.1)
    dropped: Dict[str, int] = field(default_factory=dict)
    train: List[np.ndarray] = field(init=False, repr=False, compare=False)
    val: List[np.ndarray] = field(init=False, repr=False, compare=False)
    test: List[np.ndarray] = field(init=False, repr=False, compare=False)
    train_keys: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "train", self.train_records.per_user(self.n_users))
        object.__setattr__(self, "val", self.val_records.per_user(self.n_users))
        object.__setattr__(self, "test", self.test_records.per_user(self.n_users))
        keys = np.sort(self.train_records.users * self.n_items + self.train_records.items)
        object.__setattr__(self, "train_keys", keys)

    @property
    def user_degree(self) -> np.ndarray:
        return np.bincount(self.train_records.users, minlength=self.n_users)

    @property
    def item_degree(self) -> np.ndarray:
        return np.bincount(self.train_records.items, minlength=self.n_items)

    def is_train_positive(self, users: np.ndarray, items: np.ndarray) -> np.ndarray:
        """Vectorised membership test against the training positives."""
        keys = np.asarray(users, dtype=np.int64) * self.n_items + np.asarray(items, dtype=np.int64)
        pos = np.searchsorted(self.train_keys, keys)
        pos = np.minimum(pos, max(self.train_keys.size - 1, 0))
        if self.train_keys.size == 0:
            return np.zeros(keys.shape, dtype=bool)
        return self.train_keys[pos] == keys

    def split(self, name: str) -> List[np.ndarray]:
        return {"train": self.train, "val": self.val, "test": self.test}[name]


@dataclass(frozen=True)
class BprBatch:
    """``(u, i_pos, i_neg)`` triples as three aligned index arrays."""

    users: np.ndarray
    pos_items: np.ndarray
    neg_items: np.ndarray

    def __len__(self) -> int:
        return int(self.users.size)

    @property
    def triples(self) -> List[Tuple[int, int, int]]:
        return list(zip(self.users.tolist(), self.pos_items.tolist(), self.neg_items.tolist()))
