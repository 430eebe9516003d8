"""Distill module - Joint objective for one training batch."""

import logging
from typing import Dict, Optional, Tuple, Union

import numpy as np

from pckd.core.numerics import check_finite
from pckd.core.rng import StreamFactory
from pckd.modules.backbones import GcnModel, MfModel, backward_into_embeddings
from pckd.modules.data import BprBatch
from pckd.modules.projectors import ExpertBank, de_backward, de_project
from pckd.shared.exceptions import ConfigurationError
from pckd.shared.schemas import Mode

from .losses import bpr_loss, fd_loss, pckd_h_loss, pckd_l_loss, pckd_p_loss
from .models import BatchLosses, LossValue, RankTable
from .sampling import sample_lists, sample_pairs
from .schemas import KdMethod, PckdConfig, PckdMethod, Reduction

logger = logging.getLogger(__name__)

Model = Union[MfModel, GcnModel]

USER_BANK = "user_bank."
ITEM_BANK = "item_bank."


class DistillationObjective:
    """
    Assembles ``L_base + lambda_de * L_DE + lambda_pckd * L_PCKD`` for a BPR batch.

    The teacher is read once and never written. Projector-dependent terms are computed on
    the distinct users and items of the batch; items sampled only for PCKD are projected
    separately under their own selection noise, so switching the regularizer leaves the
    DE draws untouched. An item in both sets uses its batch projection.
    """

    def __init__(
        self,
        student: Model,
        config: PckdConfig,
        kd_method: KdMethod = KdMethod.DE,
        teacher: Optional[Model] = None,
        user_bank: Optional[ExpertBank] = None,
        item_bank: Optional[ExpertBank] = None,
    ):
        self.student = student
        self.config = config
        self.kd_method = KdMethod(kd_method)
        self.user_bank = user_bank
        self.item_bank = item_bank

        if self.kd_method == KdMethod.NONE:
            if config.method != PckdMethod.NONE:
                raise ConfigurationError("PCKD regularizers need a projector (kd_method must not be none)")
            self.teacher_users = self.teacher_items = None
            return

        if teacher is None or user_bank is None or item_bank is None:
            raise ConfigurationError("Feature distillation needs a teacher and both projector banks")
        if teacher.kind != student.kind:
            raise ConfigurationError(
                "Teacher and student backbones differ",
                {"teacher": teacher.kind.value, "student": student.kind.value},
            )
        if (teacher.n_users, teacher.n_items) != (student.n_users, student.n_items):
            raise ConfigurationError("Teacher was trained on a different dataset")
        for bank in (user_bank, item_bank):
            if bank.in_dim != student.dim or bank.out_dim != teacher.dim or bank.teacher_dim != teacher.dim:
                raise ConfigurationError(
                    "Projector dimensions do not match the student and teacher",
                    {"student": student.dim, "teacher": teacher.dim, "projector": (bank.in_dim, bank.out_dim)},
                )
        teacher_users, teacher_items = teacher.propagate()
        self.teacher_users = np.array(teacher_users, dtype=np.float64)
        self.teacher_items = np.array(teacher_items, dtype=np.float64)

    # ============== Parameters ==============

    def parameters(self) -> Dict[str, np.ndarray]:
        """Every trainable block under its optimizer name."""
        params = dict(self.student.parameters())
        if self.kd_method != KdMethod.NONE:
            params.update(self.user_bank.parameters(prefix=USER_BANK))
            params.update(self.item_bank.parameters(prefix=ITEM_BANK))
        return params

    def load_parameters(self, params: Dict[str, np.ndarray]) -> None:
        self.student.load_parameters(params)
        if self.kd_method != KdMethod.NONE:
            self.user_bank.load_parameters(params, prefix=USER_BANK)
            self.item_bank.load_parameters(params, prefix=ITEM_BANK)

    # ============== Sampling ==============

    def _sample(
        self,
        users: np.ndarray,
        rank_table: Optional[RankTable],
        streams: StreamFactory,
        epoch: int,
        batch_index: int,
    ) -> Tuple[Optional[np.ndarray], Optional[Tuple[np.ndarray, np.ndarray]]]:
        method = self.config.method
        if method == PckdMethod.NONE:
            return None, None
        if rank_table is None:
            raise ConfigurationError("PCKD sampling needs a rank table")
        stream = streams.stream("pckd", epoch, batch_index)
        lists = pairs = None
        if method in (PckdMethod.PCKD_L, PckdMethod.PCKD_H):
            lists = sample_lists(
                rank_table, users, self.config.T, self.config.Q, stream.child(0), self.config.sampling_mode
            ).items
        if method in (PckdMethod.PCKD_P, PckdMethod.PCKD_H):
            t_first, t_second = self.config.pair_temperatures
            sample = sample_pairs(rank_table, users, t_first, t_second, stream.child(1), self.config.sampling_mode)
            pairs = (sample.first, sample.second)
        return lists, pairs

    # ============== Objective ==============

    def compute(
        self,
        batch: BprBatch,
        epoch: int,
        batch_index: int,
        streams: StreamFactory,
        rank_table: Optional[RankTable] = None,
    ) -> BatchLosses:
        """Loss components and gradients for every trainable block."""
        student_users, student_items = self.student.propagate()
        student_users = np.asarray(student_users, dtype=np.float64)
        student_items = np.asarray(student_items, dtype=np.float64)
        grad_users = np.zeros_like(student_users)
        grad_items = np.zeros_like(student_items)

        base = bpr_loss(
            student_users[batch.users], student_items[batch.pos_items], student_items[batch.neg_items]
        )
        np.add.at(grad_users, batch.users, base.grads["user"])
        np.add.at(grad_items, batch.pos_items, base.grads["pos"])
        np.add.at(grad_items, batch.neg_items, base.grads["neg"])
        result = BatchLosses(base=base.value)
        bank_grads: Dict[str, np.ndarray] = {}

        if self.kd_method != KdMethod.NONE:
            bank_grads = self._distill_terms(
                batch,
                epoch,
                batch_index,
                streams,
                rank_table,
                student_users,
                student_items,
                grad_users,
                grad_items,
                result,
            )

        result.total = result.base + self.config.lambda_de * result.de + self.config.lambda_pckd * result.pckd
        check_finite("total loss", np.asarray(result.total), epoch=epoch, batch=batch_index)
        result.grads = backward_into_embeddings(self.student, grad_users, grad_items)
        result.grads.update(bank_grads)
        for name, grad in result.grads.items():
            check_finite(name, grad, epoch=epoch, batch=batch_index)
        return result

    def _distill_terms(
        self,
        batch: BprBatch,
        epoch: int,
        batch_index: int,
        streams: StreamFactory,
        rank_table: Optional[RankTable],
        student_users: np.ndarray,
        student_items: np.ndarray,
        grad_users: np.ndarray,
        grad_items: np.ndarray,
        result: BatchLosses,
    ) -> Dict[str, np.ndarray]:
        users = np.unique(batch.users)
        batch_items = np.unique(np.concatenate([batch.pos_items, batch.neg_items]))

        # batch entities draw selection noise from children 0/1 whatever PCKD samples
        selection = streams.stream("selection", epoch, batch_index)
        projected_u, user_cache = de_project(
            self.user_bank, student_users[users], self.teacher_users[users], epoch, Mode.TRAIN, selection.child(0)
        )
        projected_b, batch_cache = de_project(
            self.item_bank,
            student_items[batch_items],
            self.teacher_items[batch_items],
            epoch,
            Mode.TRAIN,
            selection.child(1),
        )

        distill = fd_loss(
            projected_u,
            self.teacher_users[users],
            projected_b,
            self.teacher_items[batch_items],
            squared=self.config.fd_squared,
        )
        result.de = distill.value
        grad_pu = self.config.lambda_de * distill.grads["user"]
        grad_pb = self.config.lambda_de * distill.grads["item"]

        lists, pairs = self._sample(users, rank_table, streams, epoch, batch_index)
        extra_items = self._extra_items(batch_items, lists, pairs)
        items = np.concatenate([batch_items, extra_items])
        projected_i = projected_b
        extra_cache = None
        if extra_items.size:
            projected_e, extra_cache = de_project(
                self.item_bank,
                student_items[extra_items],
                self.teacher_items[extra_items],
                epoch,
                Mode.TRAIN,
                selection.child(2),
            )
            projected_i = np.concatenate([projected_b, projected_e])
        grad_pe = np.zeros((extra_items.size, projected_b.shape[1]))

        pckd = self._pckd(users, items, lists, pairs, student_users, student_items, projected_u, projected_i)
        if pckd is not None:
            result.pckd = pckd.value
            weight = self.config.lambda_pckd
            grad_pu += weight * pckd.grads["projected_user"]
            grad_pb += weight * pckd.grads["projected_items"][: batch_items.size]
            grad_pe += weight * pckd.grads["projected_items"][batch_items.size :]
            if "student_user" in pckd.grads:
                grad_users[users] += weight * pckd.grads["student_user"]
                grad_items[items] += weight * pckd.grads["student_items"]

        grad_su, user_params = de_backward(self.user_bank, user_cache, grad_pu)
        grad_sb, item_params = de_backward(self.item_bank, batch_cache, grad_pb)
        grad_users[users] += grad_su
        grad_items[batch_items] += grad_sb
        if extra_cache is not None:
            grad_se, extra_params = de_backward(self.item_bank, extra_cache, grad_pe)
            grad_items[extra_items] += grad_se
            item_params = {key: grad + extra_params[key] for key, grad in item_params.items()}

        bank_grads = {}
        for prefix, bank, params in ((USER_BANK, self.user_bank, user_params), (ITEM_BANK, self.item_bank, item_params)):
            for key, grad in params.items():
                # a single expert always gets weight 1, its selection net is unused
                if bank.n_experts == 1 and key.startswith("select."):
                    continue
                bank_grads[prefix + key] = grad
        return bank_grads

    @staticmethod
    def _extra_items(
        batch_items: np.ndarray,
        lists: Optional[np.ndarray],
        pairs: Optional[Tuple[np.ndarray, np.ndarray]],
    ) -> np.ndarray:
        """Sampled PCKD items that are not already in the batch, sorted."""
        sampled = []
        if lists is not None:
            sampled.append(lists.ravel())
        if pairs is not None:
            sampled.extend(pairs)
        if not sampled:
            return np.zeros(0, dtype=np.int64)
        return np.setdiff1d(np.concatenate(sampled), batch_items)

    def _pckd(
        self,
        users: np.ndarray,
        items: np.ndarray,
        lists: Optional[np.ndarray],
        pairs: Optional[Tuple[np.ndarray, np.ndarray]],
        student_users: np.ndarray,
        student_items: np.ndarray,
        projected_u: np.ndarray,
        projected_i: np.ndarray,
    ) -> Optional[LossValue]:
        method = self.config.method
        if method == PckdMethod.NONE:
            return None

        position = np.full(student_items.shape[0], -1, dtype=np.int64)
        position[items] = np.arange(items.size)

        def local(ids: np.ndarray) -> np.ndarray:
            return position[ids]

        su = student_users[users]
        si = student_items[items]
        if method == PckdMethod.PCKD_P:
            loss = pckd_p_loss(su, si, projected_u, projected_i, local(pairs[0]), local(pairs[1]))
        elif method == PckdMethod.PCKD_L:
            loss = pckd_l_loss(su, si, projected_u, projected_i, local(lists), self.config.detach_targets)
        else:
            loss = pckd_h_loss(
                su,
                si,
                projected_u,
                projected_i,
                local(lists),
                local(pairs[0]),
                local(pairs[1]),
                self.config.alpha,
                self.config.detach_targets,
            )
        if self.config.reduction == Reduction.SUM:
            scale = float(users.size)
            loss = LossValue(loss.value * scale, {name: grad * scale for name, grad in loss.grads.items()})
        return loss
