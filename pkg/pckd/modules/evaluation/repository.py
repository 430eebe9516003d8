"""Evaluation module - Metric run-log CSV (``epoch,split,metric,value``)."""

from pathlib import Path
from typing import Union

import pandas as pd

from pckd.shared.files import atomic_write_text

from .schemas import EvalResult

PathLike = Union[str, Path]
COLUMNS = ["epoch", "split", "metric", "value"]


def metric_rows(epoch: int, result: EvalResult) -> pd.DataFrame:
    rows = []
    for n in sorted(result.metrics):
        rows.append((epoch, result.split, f"recall@{n}", result.metrics[n].recall))
        rows.append((epoch, result.split, f"ndcg@{n}", result.metrics[n].ndcg))
    return pd.DataFrame(rows, columns=COLUMNS)


def append_metrics(path: PathLike, epoch: int, result: EvalResult) -> Path:
    """Append one evaluation to the metric log, rewriting the file atomically."""
    target = Path(path)
    frame = metric_rows(epoch, result)
    if target.exists() and target.stat().st_size:
        frame = pd.concat([pd.read_csv(target), frame], ignore_index=True)
    return atomic_write_text(target, frame.to_csv(index=False))
