"""Diagnostics module - CSV output for inconsistency curves and group-wise matrices."""

from pathlib import Path
from typing import Iterable, Tuple, Union

import numpy as np
import pandas as pd

from pckd.shared.exceptions import ConfigurationError
from pckd.shared.files import atomic_write_text

from .schemas import GROUP_LABELS, InconsistencyReport

PathLike = Union[str, Path]


def curve_frame(points: Iterable[Tuple[int, float]]) -> pd.DataFrame:
    return pd.DataFrame(list(points), columns=["epoch", "C"])


def write_curve(path: PathLike, reports: Iterable[InconsistencyReport]) -> Path:
    """``epoch,C`` rows, one per report."""
    frame = curve_frame((report.epoch, report.C) for report in reports)
    return atomic_write_text(path, frame.to_csv(index=False))


def groupwise_frame(matrix: np.ndarray) -> pd.DataFrame:
    if np.shape(matrix) != (len(GROUP_LABELS), len(GROUP_LABELS)):
        raise ConfigurationError("Group-wise matrix must be 5x5", {"shape": np.shape(matrix)})
    return pd.DataFrame(np.asarray(matrix, dtype=np.float64), index=list(GROUP_LABELS), columns=list(GROUP_LABELS))


def write_groupwise(path: PathLike, matrix: np.ndarray) -> Path:
    """5x5 matrix with ``g1..g5`` row and column labels."""
    return atomic_write_text(path, groupwise_frame(matrix).to_csv(index_label="group"))


def read_groupwise(path: PathLike) -> np.ndarray:
    return pd.read_csv(path, index_col=0).loc[list(GROUP_LABELS), list(GROUP_LABELS)].to_numpy()


def groupwise_snapshot_rows(epoch: int, matrix: np.ndarray) -> pd.DataFrame:
    """Long-format rows ``epoch,m,n,value`` with 1-based group indices."""
    frame = groupwise_frame(matrix)
    rows = [
        (epoch, m + 1, n + 1, float(frame.iat[m, n]))
        for m in range(len(GROUP_LABELS))
        for n in range(len(GROUP_LABELS))
    ]
    return pd.DataFrame(rows, columns=["epoch", "m", "n", "value"])
