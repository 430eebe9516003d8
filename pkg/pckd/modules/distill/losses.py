"""
Distill module - Loss functions with hand-derived gradients.

Every loss works on gathered feature rows and returns a ``LossValue`` whose gradients are
keyed by the argument they belong to. Teacher features never receive gradients. In the
PCKD losses the student-side preference (pair sign, list target) is a detached target
unless ``detach_targets`` is switched off for the list-wise loss.
"""

from typing import Iterable, Optional, Tuple

import numpy as np

from pckd.core.numerics import check_same_shape, check_shape, expit, log_softmax, neg_log_sigmoid, pref_sign, softmax
from pckd.core.rng import RngStream
from pckd.modules.projectors import ExpertBank, de_backward, de_project
from pckd.shared.exceptions import ConfigurationError, DomainError
from pckd.shared.schemas import Mode

from .models import LossValue


def combine(weighted: Iterable[Tuple[float, LossValue]]) -> LossValue:
    """Weighted sum of losses; gradients with the same key are added."""
    value = 0.0
    grads = {}
    for weight, loss in weighted:
        value += weight * loss.value
        for key, grad in loss.grads.items():
            scaled = weight * grad
            grads[key] = grads[key] + scaled if key in grads else scaled
    return LossValue(value, grads)


# ============== Base loss ==============


def bpr_loss(user_f: np.ndarray, pos_f: np.ndarray, neg_f: np.ndarray) -> LossValue:
    """Mean of ``-log sigmoid(s(u, i+) - s(u, i-))`` over the triples."""
    check_same_shape("positive item features", user_f, pos_f)
    check_same_shape("negative item features", user_f, neg_f)
    u = np.asarray(user_f, dtype=np.float64)
    pos = np.asarray(pos_f, dtype=np.float64)
    neg = np.asarray(neg_f, dtype=np.float64)
    if u.shape[0] == 0:
        raise DomainError("BPR batch is empty")
    gap = pos - neg
    diff = np.sum(u * gap, axis=1)
    dx = -expit(-diff)[:, None] / diff.size
    return LossValue(
        float(np.mean(neg_log_sigmoid(diff))),
        {"user": dx * gap, "pos": dx * u, "neg": -dx * u},
    )


# ============== Feature distillation ==============


def _distance(projected: np.ndarray, teacher: np.ndarray, squared: bool) -> Tuple[float, np.ndarray]:
    residual = np.asarray(projected, dtype=np.float64) - np.asarray(teacher, dtype=np.float64)
    if squared:
        return float(np.sum(residual * residual)), 2.0 * residual
    norms = np.sqrt(np.sum(residual * residual, axis=1))
    safe = np.where(norms > 0, norms, 1.0)
    # the norm has no gradient at zero residual; use 0 there
    grad = np.where(norms[:, None] > 0, residual / safe[:, None], 0.0)
    return float(np.sum(norms)), grad


def fd_loss(
    projected_u: np.ndarray,
    teacher_u: np.ndarray,
    projected_i: np.ndarray,
    teacher_i: np.ndarray,
    squared: bool = True,
) -> LossValue:
    """
    Sum over the batch of teacher-to-projected distances, users plus items.

    ``squared=True`` sums squared L2 distances, ``False`` sums unsquared L2 norms.
    """
    check_same_shape("projected user features", projected_u, teacher_u)
    check_same_shape("projected item features", projected_i, teacher_i)
    user_value, user_grad = _distance(projected_u, teacher_u, squared)
    item_value, item_grad = _distance(projected_i, teacher_i, squared)
    return LossValue(user_value + item_value, {"user": user_grad, "item": item_grad})


def de_loss(
    student_u: np.ndarray,
    teacher_u: np.ndarray,
    student_i: np.ndarray,
    teacher_i: np.ndarray,
    user_bank: ExpertBank,
    item_bank: ExpertBank,
    epoch: int,
    mode: Mode = Mode.TRAIN,
    user_rng: Optional[RngStream] = None,
    item_rng: Optional[RngStream] = None,
    user_noise: Optional[np.ndarray] = None,
    item_noise: Optional[np.ndarray] = None,
    squared: bool = True,
) -> LossValue:
    """
    Feature distillation through the expert banks.

    Gradients: ``user`` / ``item`` for the student feature rows, and
    ``user_bank.<param>`` / ``item_bank.<param>`` for every bank parameter.
    """
    projected_u, user_cache = de_project(user_bank, student_u, teacher_u, epoch, mode, user_rng, user_noise)
    projected_i, item_cache = de_project(item_bank, student_i, teacher_i, epoch, mode, item_rng, item_noise)
    distill = fd_loss(projected_u, teacher_u, projected_i, teacher_i, squared)

    grad_u, user_params = de_backward(user_bank, user_cache, distill.grads["user"])
    grad_i, item_params = de_backward(item_bank, item_cache, distill.grads["item"])
    grads = {"user": grad_u, "item": grad_i}
    grads.update({f"user_bank.{key}": grad for key, grad in user_params.items()})
    grads.update({f"item_bank.{key}": grad for key, grad in item_params.items()})
    return LossValue(distill.value, grads)


# ============== Preference-consistency regularizers ==============


def _rows(name: str, table: np.ndarray, rows: int) -> np.ndarray:
    check_shape(name, table, (rows, None))
    return np.asarray(table, dtype=np.float64)


def pckd_p_loss(
    student_user: np.ndarray,
    student_items: np.ndarray,
    projected_user: np.ndarray,
    projected_items: np.ndarray,
    first: np.ndarray,
    second: np.ndarray,
) -> LossValue:
    """
    Pair-wise consistency: mean of ``-log sigmoid(pref * (s~(u,i) - s~(u,j)))``.

    ``student_user`` / ``projected_user`` hold one row per pair; ``first`` and ``second``
    index rows of the item tables. ``pref`` is the sign of the student's own score gap
    with ``sign(0) = +1``. Gradients: ``projected_user`` and ``projected_items``.
    """
    first = np.asarray(first, dtype=np.int64)
    second = np.asarray(second, dtype=np.int64)
    rows = first.size
    su = _rows("student user rows", student_user, rows)
    pu = _rows("projected user rows", projected_user, rows)
    si = np.asarray(student_items, dtype=np.float64)
    pi = _rows("projected item rows", projected_items, si.shape[0])
    if second.size != rows:
        raise ConfigurationError("Pair index arrays differ in length")
    if np.any(first == second):
        raise DomainError("PCKD-P pair has identical items", {"pairs": int(np.sum(first == second))})

    grad_items = np.zeros_like(pi)
    if rows == 0:
        return LossValue(0.0, {"projected_user": np.zeros_like(pu), "projected_items": grad_items})

    pref = pref_sign(np.sum(su * (si[first] - si[second]), axis=1))
    gap = pi[first] - pi[second]
    margin = pref * np.sum(pu * gap, axis=1)
    d_diff = (-expit(-margin) * pref / rows)[:, None]

    np.add.at(grad_items, first, d_diff * pu)
    np.add.at(grad_items, second, -d_diff * pu)
    return LossValue(
        float(np.mean(neg_log_sigmoid(margin))),
        {"projected_user": d_diff * gap, "projected_items": grad_items},
    )


def pckd_l_loss(
    student_user: np.ndarray,
    student_items: np.ndarray,
    projected_user: np.ndarray,
    projected_items: np.ndarray,
    lists: np.ndarray,
    detach_targets: bool = True,
) -> LossValue:
    """
    List-wise consistency: cross-entropy from the student's softmax over each Q-item set
    to the projected softmax over the same set, averaged over rows.

    Gradients: ``projected_user`` and ``projected_items``; with ``detach_targets=False``
    also ``student_user`` and ``student_items``.
    """
    lists = np.asarray(lists, dtype=np.int64)
    if lists.ndim != 2 or lists.shape[1] < 2:
        raise ConfigurationError("List-wise sets need shape (rows, Q) with Q >= 2", {"shape": lists.shape})
    rows = lists.shape[0]
    su = _rows("student user rows", student_user, rows)
    pu = _rows("projected user rows", projected_user, rows)
    si = np.asarray(student_items, dtype=np.float64)
    pi = _rows("projected item rows", projected_items, si.shape[0])
    ordered = np.sort(lists, axis=1)
    if np.any(ordered[:, 1:] == ordered[:, :-1]):
        raise DomainError("PCKD-L item set contains duplicates")

    grads = {"projected_user": np.zeros_like(pu), "projected_items": np.zeros_like(pi)}
    if not detach_targets:
        grads["student_user"] = np.zeros_like(su)
        grads["student_items"] = np.zeros_like(si)
    if rows == 0:
        return LossValue(0.0, grads)

    student_set = si[lists]
    projected_set = pi[lists]
    target = softmax(np.einsum("bd,bqd->bq", su, student_set), axis=1)
    projected_logits = np.einsum("bd,bqd->bq", pu, projected_set)
    log_q = log_softmax(projected_logits, axis=1)
    value = float(np.mean(-np.sum(target * log_q, axis=1)))

    d_logits = (np.exp(log_q) - target) / rows
    grads["projected_user"] = np.einsum("bq,bqd->bd", d_logits, projected_set)
    np.add.at(grads["projected_items"], lists, d_logits[:, :, None] * pu[:, None, :])

    if not detach_targets:
        d_target = target * (-log_q + np.sum(target * log_q, axis=1, keepdims=True)) / rows
        grads["student_user"] = np.einsum("bq,bqd->bd", d_target, student_set)
        np.add.at(grads["student_items"], lists, d_target[:, :, None] * su[:, None, :])
    return LossValue(value, grads)


def pckd_h_loss(
    student_user: np.ndarray,
    student_items: np.ndarray,
    projected_user: np.ndarray,
    projected_items: np.ndarray,
    lists: np.ndarray,
    first: np.ndarray,
    second: np.ndarray,
    alpha: float,
    detach_targets: bool = True,
) -> LossValue:
    """``(1 - alpha) * PCKD-L + alpha * PCKD-P`` on shared user rows."""
    if not 0.0 <= alpha <= 1.0:
        raise ConfigurationError("alpha must lie in [0, 1]", {"alpha": alpha})
    listwise = pckd_l_loss(student_user, student_items, projected_user, projected_items, lists, detach_targets)
    pairwise = pckd_p_loss(student_user, student_items, projected_user, projected_items, first, second)
    return combine([(1.0 - alpha, listwise), (alpha, pairwise)])


def total_loss(
    base: LossValue,
    de: Optional[LossValue] = None,
    pckd: Optional[LossValue] = None,
    lambda_de: float = 0.0,
    lambda_pckd: float = 0.0,
) -> LossValue:
    """``base + lambda_de * de + lambda_pckd * pckd``; absent components count as zero."""
    parts = [(1.0, base)]
    if de is not None:
        parts.append((lambda_de, de))
    if pckd is not None:
        parts.append((lambda_pckd, pckd))
    return combine(parts)
