"""
Distill module - Rank table and rank-aware item sampling.

The rank-``k`` item of a user (``k`` 1-based) is drawn with probability proportional to
``exp(-k / T)``. Draws without replacement use Gumbel top-k over the log weights, so the
first draw follows the categorical distribution exactly and every later draw follows it
renormalised over the remaining ranks.
"""

import logging
from typing import Union

import numpy as np

from pckd.core.numerics import softmax
from pckd.core.rng import RngStream
from pckd.modules.backbones import GcnModel, MfModel, score_matrix
from pckd.shared.exceptions import ConfigurationError, DomainError

from .models import ListSample, PairSample, RankTable
from .schemas import SamplingMode

logger = logging.getLogger(__name__)

MAX_PAIR_ATTEMPTS = 100


def rebuild_rank_table(student: Union[MfModel, GcnModel], epoch: int = 0) -> RankTable:
    """Sort every item for every user by descending student score, training positives included."""
    scores = score_matrix(student)
    order = np.argsort(-scores, axis=1, kind="stable")
    logger.debug(f"Rebuilt rank table at epoch {epoch} ({order.shape[0]} users x {order.shape[1]} items)")
    return RankTable(order=order.astype(np.int64), built_at_epoch=epoch)


def rank_log_weights(n_items: int, T: float, mode: SamplingMode = SamplingMode.RANK_AWARE) -> np.ndarray:
    """Unnormalised log-probabilities per 0-based rank."""
    if T <= 0:
        raise ConfigurationError("Sampling temperature must be positive", {"T": T})
    if SamplingMode(mode) == SamplingMode.RANDOM:
        return np.zeros(n_items)
    return -np.arange(1, n_items + 1, dtype=np.float64) / T


def rank_probabilities(n_items: int, T: float, mode: SamplingMode = SamplingMode.RANK_AWARE) -> np.ndarray:
    """Single-draw probability of each 0-based rank."""
    return softmax(rank_log_weights(n_items, T, mode))


def sample_ranks(
    n_items: int,
    T: float,
    n: int,
    rows: int,
    rng: RngStream,
    mode: SamplingMode = SamplingMode.RANK_AWARE,
) -> np.ndarray:
    """``rows x n`` distinct 0-based ranks per row."""
    if n < 1:
        raise ConfigurationError("Sample size must be at least 1", {"n": n})
    if n > n_items:
        raise DomainError("Cannot sample more items than exist", {"n": n, "n_items": n_items})
    keys = rank_log_weights(n_items, T, mode)[None, :] + rng.gumbel((rows, n_items))
    if n == 1:
        return np.argmax(keys, axis=1)[:, None]
    return np.argsort(-keys, axis=1, kind="stable")[:, :n]


def rank_aware_sample(
    table: RankTable,
    user: int,
    T: float,
    n: int,
    rng: RngStream,
    mode: SamplingMode = SamplingMode.RANK_AWARE,
) -> np.ndarray:
    """``n`` distinct items for one user."""
    if not 0 <= user < table.n_users:
        raise DomainError("user id out of range", {"user": user})
    ranks = sample_ranks(table.n_items, T, n, 1, rng, mode)[0]
    return table.order[user, ranks]


def sample_lists(
    table: RankTable,
    users: np.ndarray,
    T: float,
    Q: int,
    rng: RngStream,
    mode: SamplingMode = SamplingMode.RANK_AWARE,
) -> ListSample:
    """One Q-item set per user row."""
    users = np.asarray(users, dtype=np.int64)
    ranks = sample_ranks(table.n_items, T, Q, users.size, rng, mode)
    return ListSample(users, table.items_at(users, ranks))


def sample_pairs(
    table: RankTable,
    users: np.ndarray,
    T_first: float,
    T_second: float,
    rng: RngStream,
    mode: SamplingMode = SamplingMode.RANK_AWARE,
) -> PairSample:
    """
    One ``(i, j)`` pair per user row, ``i`` drawn at ``T_first`` and ``j`` at ``T_second``.

    ``j`` is redrawn where it equals ``i``; after ``MAX_PAIR_ATTEMPTS`` redraws a
    remaining clash is a domain error.
    """
    users = np.asarray(users, dtype=np.int64)
    if table.n_items < 2:
        raise DomainError("Pair sampling needs at least two items", {"n_items": table.n_items})
    first = table.items_at(users, sample_ranks(table.n_items, T_first, 1, users.size, rng, mode)[:, 0])
    second = table.items_at(users, sample_ranks(table.n_items, T_second, 1, users.size, rng, mode)[:, 0])

    for _ in range(MAX_PAIR_ATTEMPTS):
        clash = np.flatnonzero(first == second)
        if clash.size == 0:
            return PairSample(users, first, second)
        redraw = sample_ranks(table.n_items, T_second, 1, clash.size, rng, mode)[:, 0]
        second[clash] = table.items_at(users[clash], redraw)
    if np.any(first == second):
        raise DomainError("Could not draw distinct pair items", {"attempts": MAX_PAIR_ATTEMPTS})
    return PairSample(users, first, second)
