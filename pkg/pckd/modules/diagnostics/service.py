"""Diagnostics module - Preference and preference-inconsistency estimates."""

import logging
from typing import Optional

import numpy as np

from pckd.core.numerics import check_same_shape, pref_sign
from pckd.core.rng import RngStream
from pckd.modules.distill import RankTable
from pckd.shared.exceptions import ConfigurationError, DomainError

from .models import ProjectedScorer
from .schemas import InconsistencyReport

logger = logging.getLogger(__name__)

N_GROUPS = 5


def pref(u_vec: np.ndarray, i_vec: np.ndarray, j_vec: np.ndarray) -> int:
    """+1 when ``u`` scores ``i`` at least as high as ``j``, else -1."""
    check_same_shape("item vector", u_vec, i_vec)
    check_same_shape("item vector", u_vec, j_vec)
    u = np.asarray(u_vec, dtype=np.float64)
    return int(pref_sign(u @ np.asarray(i_vec, dtype=np.float64) - u @ np.asarray(j_vec, dtype=np.float64)))


def _flips(student_row: np.ndarray, projected_row: np.ndarray, first: np.ndarray, second: np.ndarray) -> np.ndarray:
    return pref_sign(student_row[first] - student_row[second]) != pref_sign(projected_row[first] - projected_row[second])


def estimate_inconsistency(
    scorer: ProjectedScorer,
    pairs_per_user: int,
    rng: RngStream,
    epoch: int = 0,
) -> InconsistencyReport:
    """
    Fraction of sampled ordered pairs ``i != j`` whose preference flips under projection.

    Each user draws ``pairs_per_user`` uniform pairs from its own substream keyed by
    ``(epoch, user)``; C is the mean of the per-user fractions.
    """
    if pairs_per_user < 1:
        raise ConfigurationError("pairs_per_user must be at least 1", {"pairs": pairs_per_user})
    n_items = scorer.n_items
    if n_items < 2:
        raise DomainError("Inconsistency needs at least two items", {"n_items": n_items})

    student = scorer.student_scores()
    projected = scorer.projected_scores()
    per_user = np.zeros(scorer.n_users)
    for user in range(scorer.n_users):
        generator = rng.child(epoch, user).generator
        first = generator.integers(0, n_items, size=pairs_per_user)
        second = (first + 1 + generator.integers(0, n_items - 1, size=pairs_per_user)) % n_items
        per_user[user] = np.mean(_flips(student[user], projected[user], first, second))

    report = InconsistencyReport(
        epoch=epoch,
        C=float(np.mean(per_user)) if per_user.size else 0.0,
        per_user=per_user.tolist(),
        pairs_per_user=pairs_per_user,
    )
    logger.debug(f"Epoch {epoch}: inconsistency C={report.C:.4f}")
    return report


def exhaustive_inconsistency(scorer: ProjectedScorer) -> np.ndarray:
    """Per-user inconsistency over all ordered pairs ``i != j``."""
    n_items = scorer.n_items
    if n_items < 2:
        raise DomainError("Inconsistency needs at least two items", {"n_items": n_items})
    student = scorer.student_scores()
    projected = scorer.projected_scores()
    off_diagonal = ~np.eye(n_items, dtype=bool)
    per_user = np.zeros(scorer.n_users)
    for user in range(scorer.n_users):
        s = pref_sign(student[user][:, None] - student[user][None, :])
        p = pref_sign(projected[user][:, None] - projected[user][None, :])
        per_user[user] = np.mean((s != p)[off_diagonal])
    return per_user


def group_bounds(n_items: int, n_groups: int = N_GROUPS) -> np.ndarray:
    """Rank boundaries of equal contiguous groups; remainder ranks go to earlier groups."""
    if n_items < n_groups:
        raise DomainError("Group-wise inconsistency needs at least one item per group", {"n_items": n_items})
    base, extra = divmod(n_items, n_groups)
    sizes = np.full(n_groups, base) + (np.arange(n_groups) < extra)
    return np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)


def groupwise_inconsistency(
    scorer: ProjectedScorer,
    rank_table: RankTable,
    pairs_per_cell: int,
    rng: RngStream,
    epoch: int = 0,
    symmetrize: bool = True,
) -> np.ndarray:
    """
    5x5 matrix of inconsistency between rank groups.

    Cell ``(m, n)`` samples ordered pairs with ``i`` in group ``m`` and ``j != i`` in group
    ``n`` of each user's rank order, then averages over users. The output is symmetrized
    since ``(m, n)`` and ``(n, m)`` estimate the same quantity.
    """
    if pairs_per_cell < 1:
        raise ConfigurationError("pairs_per_cell must be at least 1", {"pairs": pairs_per_cell})
    if rank_table.n_items != scorer.n_items or rank_table.n_users != scorer.n_users:
        raise ConfigurationError("Rank table does not match the scorer")
    bounds = group_bounds(scorer.n_items)
    starts, sizes = bounds[:-1], np.diff(bounds)
    rows, cols = np.meshgrid(np.arange(N_GROUPS), np.arange(N_GROUPS), indexing="ij")
    rows, cols = rows.ravel(), cols.ravel()
    same = rows == cols
    valid = ~same | (sizes[rows] >= 2)

    student = scorer.student_scores()
    projected = scorer.projected_scores()
    totals = np.zeros(N_GROUPS * N_GROUPS)
    for user in range(scorer.n_users):
        generator = rng.child(epoch, user).generator
        offset_i = np.floor(generator.random((rows.size, pairs_per_cell)) * sizes[rows, None]).astype(np.int64)
        draw_j = generator.random((rows.size, pairs_per_cell))
        offset_j = np.where(
            same[:, None],
            (offset_i + 1 + np.floor(draw_j * np.maximum(sizes[cols, None] - 1, 1)).astype(np.int64))
            % sizes[cols, None],
            np.floor(draw_j * sizes[cols, None]).astype(np.int64),
        )
        first = rank_table.order[user, starts[rows, None] + offset_i]
        second = rank_table.order[user, starts[cols, None] + offset_j]
        totals += np.mean(_flips(student[user], projected[user], first, second), axis=1)

    matrix = np.where(valid, totals / max(scorer.n_users, 1), 0.0).reshape(N_GROUPS, N_GROUPS)
    if symmetrize:
        matrix = 0.5 * (matrix + matrix.T)
    return matrix


def exhaustive_groupwise(scorer: ProjectedScorer, rank_table: RankTable) -> np.ndarray:
    """Group-wise inconsistency over all ordered pairs of every cell."""
    bounds = group_bounds(scorer.n_items)
    student = scorer.student_scores()
    projected = scorer.projected_scores()
    matrix = np.zeros((N_GROUPS, N_GROUPS))
    for user in range(scorer.n_users):
        order = rank_table.order[user]
        s = pref_sign(student[user][:, None] - student[user][None, :])
        p = pref_sign(projected[user][:, None] - projected[user][None, :])
        flips = (s != p)[np.ix_(order, order)]
        for m in range(N_GROUPS):
            for n in range(N_GROUPS):
                block = flips[bounds[m] : bounds[m + 1], bounds[n] : bounds[n + 1]]
                if m == n:
                    size = block.shape[0]
                    if size >= 2:
                        matrix[m, n] += (block.sum() - np.trace(block)) / (size * (size - 1))
                else:
                    matrix[m, n] += block.mean()
    return matrix / max(scorer.n_users, 1)


def diagnose(
    scorer: ProjectedScorer,
    rank_table: Optional[RankTable],
    rng: RngStream,
    pairs_per_user: int = 100,
    pairs_per_cell: Optional[int] = 50,
    epoch: int = 0,
) -> InconsistencyReport:
    """Global estimate, plus the group-wise matrix when a rank table and cell budget are given."""
    report = estimate_inconsistency(scorer, pairs_per_user, rng.child(0), epoch)
    if rank_table is not None and pairs_per_cell:
        matrix = groupwise_inconsistency(scorer, rank_table, pairs_per_cell, rng.child(1), epoch)
        report = report.model_copy(update={"groupwise": matrix.tolist(), "pairs_per_cell": pairs_per_cell})
    return report
