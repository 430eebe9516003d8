"""Data module - Filtering, chronological splitting, batching and synthetic data."""

import logging
from typing import Iterator, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from pckd.core.rng import RngStream, StreamFactory
from pckd.shared.exceptions import ConfigurationError, DomainError

from .models import BprBatch, Dataset, IdMaps, Interaction, InteractionLog, SplitRecords
from .schemas import SplitMode

logger = logging.getLogger(__name__)

# Upper bound on rejection rounds when drawing negatives
MAX_NEGATIVE_ROUNDS = 1000


def _to_frame(log: InteractionLog) -> pd.DataFrame:
    return pd.DataFrame.from_records(list(log.records), columns=["user", "item", "timestamp"])


def _to_log(frame: pd.DataFrame) -> InteractionLog:
    return InteractionLog(
        tuple(
            Interaction(u, i, int(t))
            for u, i, t in zip(frame["user"].tolist(), frame["item"].tolist(), frame["timestamp"].tolist())
        )
    )


def _first_appearance_map(values: Sequence[str]) -> dict:
    _, uniques = pd.factorize(pd.Series(list(values), dtype=object), sort=False)
    return {str(raw): int(dense) for dense, raw in enumerate(uniques)}


def preprocess(log: InteractionLog, min_interactions: int = 10) -> Tuple[InteractionLog, IdMaps]:
    """
    Collapse duplicates and filter users/items to a fixed point.

    Duplicate ``(user, item)`` pairs keep only the earliest timestamp (first record on
    ties). Users and items with fewer than ``min_interactions`` records are removed
    repeatedly until nothing changes. Dense ids follow first appearance in the result.
    """
    if len(log) == 0:
        raise DomainError("Interaction log is empty")

    frame = _to_frame(log)
    frame["position"] = np.arange(len(frame))
    earliest = frame.sort_values(["timestamp", "position"], kind="stable").drop_duplicates(
        ["user", "item"], keep="first"
    )
    frame = earliest.sort_values("position", kind="stable")

    rounds = 0
    while True:
        rounds += 1
        user_counts = frame["user"].map(frame["user"].value_counts())
        item_counts = frame["item"].map(frame["item"].value_counts())
        keep = (user_counts >= min_interactions) & (item_counts >= min_interactions)
        if bool(keep.all()):
            break
        frame = frame[keep]
        if frame.empty:
            raise DomainError(
                "dataset vanished under filtering",
                {"min_interactions": min_interactions, "rounds": rounds},
            )

    logger.debug(f"Filtering reached a fixed point after {rounds} round(s), {len(frame)} records kept")
    filtered = _to_log(frame)
    id_maps = IdMaps(
        users=_first_appearance_map(frame["user"].tolist()),
        items=_first_appearance_map(frame["item"].tolist()),
    )
    return filtered, id_maps


def _split_counts(n: int, ratios: Tuple[float, float, float]) -> Tuple[int, int]:
    n_train = int(np.floor(n * ratios[0] + 1e-9))
    n_val = int(np.floor(n * ratios[1] + 1e-9))
    return n_train, min(n_val, n - n_train)


def _validate_ratios(ratios: Sequence[float]) -> Tuple[float, float, float]:
    if len(ratios) != 3 or any(r < 0 for r in ratios) or not np.isclose(sum(ratios), 1.0):
        raise ConfigurationError("Split ratios must be three nonnegative values summing to 1", {"ratios": tuple(ratios)})
    return (float(ratios[0]), float(ratios[1]), float(ratios[2]))


def chrono_split(
    log: InteractionLog,
    id_maps: Optional[IdMaps] = None,
    ratios: Sequence[float] = (0.8, 0.1, 0.1),
    split_mode: SplitMode = SplitMode.GLOBAL,
) -> Dataset:
    """
    Split a preprocessed log chronologically into train/val/test.

    Global mode sorts all records by timestamp (ties keep input order) and cuts at the
    ratios; per-user mode applies the same cut to each user's own history. Validation and
    test records whose user or item never occurs in training are dropped and counted, and
    dense ids are compacted to the entities that remain in training.
    """
    ratios = _validate_ratios(ratios)
    if id_maps is None:
        id_maps = IdMaps(
            users=_first_appearance_map([r.user for r in log.records]),
            items=_first_appearance_map([r.item for r in log.records]),
        )

    users = np.array([id_maps.users[r.user] for r in log.records], dtype=np.int64)
    items = np.array([id_maps.items[r.item] for r in log.records], dtype=np.int64)
    stamps = np.array([r.timestamp for r in log.records], dtype=np.int64)
    order = np.argsort(stamps, kind="stable")

    part = np.empty(len(order), dtype=np.int8)
    if split_mode == SplitMode.GLOBAL:
        n_train, n_val = _split_counts(len(order), ratios)
        part[order[:n_train]] = 0
        part[order[n_train : n_train + n_val]] = 1
        part[order[n_train + n_val :]] = 2
    else:
        sorted_users = users[order]
        for user in np.unique(users):
            rows = order[sorted_users == user]
            n_train, n_val = _split_counts(rows.size, ratios)
            part[rows[:n_train]] = 0
            part[rows[n_train : n_train + n_val]] = 1
            part[rows[n_train + n_val :]] = 2

    train_mask = part[order] == 0
    train_users = np.unique(users[order][train_mask])
    train_items = np.unique(items[order][train_mask])

    # compact dense ids to entities seen in training, preserving first-appearance order
    user_remap = np.full(len(id_maps.users), -1, dtype=np.int64)
    user_remap[train_users] = np.arange(train_users.size)
    item_remap = np.full(len(id_maps.items), -1, dtype=np.int64)
    item_remap[train_items] = np.arange(train_items.size)

    splits = {}
    dropped = {}
    for index, name in enumerate(("train", "val", "test")):
        rows = order[part[order] == index]
        u = user_remap[users[rows]]
        i = item_remap[items[rows]]
        known = (u >= 0) & (i >= 0)
        dropped[name] = int(rows.size - np.count_nonzero(known))
        splits[name] = SplitRecords(u[known], i[known], stamps[rows][known])

    compact = IdMaps(
        users={raw: int(user_remap[dense]) for raw, dense in id_maps.users.items() if user_remap[dense] >= 0},
        items={raw: int(item_remap[dense]) for raw, dense in id_maps.items.items() if item_remap[dense] >= 0},
    )
    if dropped["val"] or dropped["test"]:
        logger.info(f"Dropped {dropped['val']} val and {dropped['test']} test records with entities unseen in training")

    return Dataset(
        n_users=int(train_users.size),
        n_items=int(train_items.size),
        train_records=splits["train"],
        val_records=splits["val"],
        test_records=splits["test"],
        id_maps=compact,
        ratios=ratios,
        dropped={"val": dropped["val"], "test": dropped["test"]},
    )


def _draw_negatives(dataset: Dataset, users: np.ndarray, generator: np.random.Generator) -> np.ndarray:
    saturated = dataset.user_degree[users] >= dataset.n_items
    if np.any(saturated):
        raise DomainError(
            "Cannot sample a negative item: user is positive on every item",
            {"user": int(users[np.argmax(saturated)])},
        )
    negatives = generator.integers(0, dataset.n_items, size=users.size)
    for _ in range(MAX_NEGATIVE_ROUNDS):
        clash = dataset.is_train_positive(users, negatives)
        if not np.any(clash):
            return negatives
        negatives[clash] = generator.integers(0, dataset.n_items, size=int(np.count_nonzero(clash)))
    raise DomainError("Negative sampling did not converge", {"rounds": MAX_NEGATIVE_ROUNDS})


def sample_bpr_batch(dataset: Dataset, batch_size: int, rng: RngStream) -> BprBatch:
    """Sample ``(u, i+)`` uniformly from training pairs and a uniform unseen ``i-``."""
    if batch_size < 1:
        raise ConfigurationError("batch_size must be at least 1", {"batch_size": batch_size})
    n_train = len(dataset.train_records)
    if n_train == 0:
        raise DomainError("Training split is empty")
    generator = rng.generator
    picks = generator.integers(0, n_train, size=batch_size)
    users = dataset.train_records.users[picks]
    pos = dataset.train_records.items[picks]
    return BprBatch(users, pos, _draw_negatives(dataset, users, generator))


def iterate_epoch(dataset: Dataset, batch_size: int, rng: RngStream) -> Iterator[BprBatch]:
    """One shuffled pass over every training pair with fresh negatives per batch."""
    if batch_size < 1:
        raise ConfigurationError("batch_size must be at least 1", {"batch_size": batch_size})
    generator = rng.generator
    order = generator.permutation(len(dataset.train_records))
    for start in range(0, order.size, batch_size):
        picks = order[start : start + batch_size]
        users = dataset.train_records.users[picks]
        pos = dataset.train_records.items[picks]
        yield BprBatch(users, pos, _draw_negatives(dataset, users, generator))


def generate_synthetic(
    n_users: int,
    n_items: int,
    latent_dim: int = 16,
    density: float = 0.02,
    seed: int = 0,
    time_span: int = 10**8,
) -> InteractionLog:
    """
    Latent-factor synthetic log.

    User and item factors are standard normal; a pair interacts when its inner product
    exceeds the ``1 - density`` quantile of all inner products. Timestamps are uniform
    over ``[0, time_span)``. Deterministic in ``seed``.
    """
    if not 0.0 < density < 1.0:
        raise DomainError("density must lie strictly between 0 and 1", {"density": density})
    if n_users < 1 or n_items < 1 or latent_dim < 1:
        raise DomainError("n_users, n_items and latent_dim must be positive")

    generator = StreamFactory(seed).stream("synthetic").generator
    user_factors = generator.standard_normal((n_users, latent_dim))
    item_factors = generator.standard_normal((n_items, latent_dim))
    affinity = user_factors @ item_factors.T
    threshold = np.quantile(affinity, 1.0 - density)
    rows, cols = np.nonzero(affinity > threshold)
    if rows.size == 0:
        raise DomainError("Synthetic parameters produce zero interactions", {"density": density})

    stamps = generator.integers(0, time_span, size=rows.size)
    return InteractionLog(
        tuple(Interaction(f"u{u}", f"i{i}", int(t)) for u, i, t in zip(rows.tolist(), cols.tolist(), stamps.tolist()))
    )
