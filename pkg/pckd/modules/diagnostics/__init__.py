"""Diagnostics module - Preference inconsistency between student and projected scores."""

from .models import ProjectedScorer
from .repository import groupwise_frame, groupwise_snapshot_rows, read_groupwise, write_curve, write_groupwise
from .schemas import GROUP_LABELS, InconsistencyReport
from .service import (
    diagnose,
    estimate_inconsistency,
    exhaustive_groupwise,
    exhaustive_inconsistency,
    group_bounds,
    groupwise_inconsistency,
    pref,
)

__all__ = [
    "ProjectedScorer",
    "groupwise_frame",
    "groupwise_snapshot_rows",
    "read_groupwise",
    "write_curve",
    "write_groupwise",
    "GROUP_LABELS",
    "InconsistencyReport",
    "diagnose",
    "estimate_inconsistency",
    "exhaustive_groupwise",
    "exhaustive_inconsistency",
    "group_bounds",
    "groupwise_inconsistency",
    "pref",
]
