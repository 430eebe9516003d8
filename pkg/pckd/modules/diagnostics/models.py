"""Diagnostics module - Student and projected score tables."""

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from pckd.core.numerics import check_shape
from pckd.modules.backbones import GcnModel, MfModel
from pckd.modules.projectors import ExpertBank, de_project
from pckd.shared.exceptions import ConfigurationError
from pckd.shared.schemas import Mode

Model = Union[MfModel, GcnModel]


@dataclass(frozen=True)
class ProjectedScorer:
    """Student features and their projections for every user and item."""

    student_users: np.ndarray
    student_items: np.ndarray
    projected_users: np.ndarray
    projected_items: np.ndarray

    def __post_init__(self) -> None:
        check_shape("projected users", self.projected_users, (self.student_users.shape[0], None))
        check_shape("projected items", self.projected_items, (self.student_items.shape[0], self.projected_users.shape[1]))

    @property
    def n_users(self) -> int:
        return int(self.student_users.shape[0])

    @property
    def n_items(self) -> int:
        return int(self.student_items.shape[0])

    def student_scores(self, user: Optional[int] = None) -> np.ndarray:
        users = self.student_users if user is None else self.student_users[user]
        return np.asarray(users, dtype=np.float64) @ np.asarray(self.student_items, dtype=np.float64).T

    def projected_scores(self, user: Optional[int] = None) -> np.ndarray:
        users = self.projected_users if user is None else self.projected_users[user]
        return np.asarray(users, dtype=np.float64) @ np.asarray(self.projected_items, dtype=np.float64).T

    @classmethod
    def from_models(
        cls,
        student: Model,
        user_bank: ExpertBank,
        item_bank: ExpertBank,
        teacher: Optional[Model] = None,
        epoch: int = 0,
    ) -> "ProjectedScorer":
        """Project every student feature in eval mode (argmax expert selection)."""
        student_users, student_items = student.propagate()
        if teacher is None:
            if user_bank.n_experts > 1 or item_bank.n_experts > 1:
                raise ConfigurationError("Expert selection needs teacher features")
            teacher_users = np.zeros((student.n_users, user_bank.teacher_dim))
            teacher_items = np.zeros((student.n_items, item_bank.teacher_dim))
        else:
            teacher_users, teacher_items = teacher.propagate()
        projected_users, _ = de_project(user_bank, student_users, teacher_users, epoch, Mode.EVAL)
        projected_items, _ = de_project(item_bank, student_items, teacher_items, epoch, Mode.EVAL)
        return cls(np.asarray(student_users), np.asarray(student_items), projected_users, projected_items)
