"""Trainer module - Config files, digests, run logs and manifests."""

import hashlib
import io
import logging
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

import orjson
import pandas as pd
from dotenv import dotenv_values

from pckd.core.config import Settings, get_settings
from pckd.modules.diagnostics import groupwise_snapshot_rows
from pckd.modules.distill import KdMethod, PckdConfig, PckdMethod
from pckd.shared.exceptions import ConfigurationError
from pckd.shared.files import atomic_write_bytes, atomic_write_text
from pckd.shared.schemas import validate_config

from .models import RUN_LOG_COLUMNS, EpochRecord, RunLog
from .schemas import PATH_FIELDS, GridSpec, RunConfig

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
PCKD_KEYS = frozenset(PckdConfig.model_fields)


# ============== Config ==============


def nest_config(flat: Mapping[str, Any]) -> Dict[str, Any]:
    """Move flat PCKD keys (``Q``, ``alpha``...) under ``pckd``; ``None`` values are dropped."""
    nested: Dict[str, Any] = {}
    pckd: Dict[str, Any] = {}
    for key, value in flat.items():
        if value is None:
            continue
        if key == "pckd" and isinstance(value, Mapping):
            pckd.update({k: v for k, v in value.items() if v is not None})
        elif key in PCKD_KEYS:
            pckd[key] = value
        else:
            nested[key] = value
    if pckd:
        nested["pckd"] = pckd
    return nested


def merge_config(*layers: Mapping[str, Any]) -> Dict[str, Any]:
    """Later layers win, key by key (PCKD keys included)."""
    merged: Dict[str, Any] = {}
    for layer in layers:
        nested = nest_config(layer)
        pckd = {**merged.get("pckd", {}), **nested.pop("pckd", {})}
        merged.update(nested)
        if pckd:
            merged["pckd"] = pckd
    return merged


def read_config_file(path: PathLike) -> Dict[str, Any]:
    """``key=value`` lines; ``#`` comments allowed. ``method`` takes the ``--method`` values."""
    source = Path(path)
    if not source.is_file():
        raise ConfigurationError("Config file not found", {"path": str(source)})
    raw = source.read_bytes()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ConfigurationError("Config file is not valid UTF-8", {"path": str(source), "offset": exc.start}) from None
    values = dotenv_values(stream=io.StringIO(text))
    config = {key: value for key, value in values.items() if value is not None and value != ""}
    if "method" in config:
        # same vocabulary as --method; an explicit kd_method in the file still wins
        config = {**method_overrides(config.pop("method")), **config}
    return config


def method_overrides(method: str) -> Dict[str, Any]:
    """``--method`` value as ``kd_method`` plus the PCKD ``method``."""
    if method in (KdMethod.NONE.value, KdMethod.FITNET.value, KdMethod.DE.value):
        return {"kd_method": method, "method": PckdMethod.NONE.value}
    return {"kd_method": KdMethod.DE.value, "method": method}


def build_run_config(
    overrides: Optional[Mapping[str, Any]] = None,
    config_file: Optional[PathLike] = None,
    settings: Optional[Settings] = None,
) -> RunConfig:
    """Defaults, then the config file, then explicit overrides (flags win)."""
    active = settings or get_settings()
    layers = [{"seed": active.default_seed}]
    if config_file is not None:
        layers.append(read_config_file(config_file))
    layers.append(dict(overrides or {}))
    return validate_config(RunConfig, merge_config(*layers))


def config_digest(config: RunConfig) -> bytes:
    """SHA-256 of the canonical JSON of the config without its paths."""
    payload = config.model_dump(mode="json", exclude=set(PATH_FIELDS))
    return hashlib.sha256(orjson.dumps(payload, option=orjson.OPT_SORT_KEYS)).digest()


def read_grid_spec(path: PathLike) -> GridSpec:
    source = Path(path)
    if not source.is_file():
        raise ConfigurationError("Grid spec not found", {"path": str(source)})
    try:
        data = orjson.loads(source.read_bytes())
    except orjson.JSONDecodeError as exc:
        raise ConfigurationError("Grid spec is not valid JSON", {"error": str(exc)}) from None
    return validate_config(GridSpec, data)


# ============== Run outputs ==============


def run_log_frame(run_log: RunLog) -> pd.DataFrame:
    rows = [
        (r.epoch, r.loss_base, r.loss_de, r.loss_pckd, r.val_ndcg20, r.C, r.seconds) for r in run_log.records
    ]
    return pd.DataFrame(rows, columns=RUN_LOG_COLUMNS)


def write_run_log(path: PathLike, run_log: RunLog) -> Path:
    return atomic_write_text(path, run_log_frame(run_log).to_csv(index=False, float_format="%.10g"))


def read_run_log(path: PathLike) -> RunLog:
    frame = pd.read_csv(path)
    run_log = RunLog()
    for row in frame.itertuples(index=False):
        run_log.append(
            EpochRecord(
                epoch=int(row.epoch),
                loss_base=float(row.loss_base),
                loss_de=float(row.loss_de),
                loss_pckd=float(row.loss_pckd),
                val_ndcg20=float(row.val_ndcg20),
                C=None if pd.isna(row.C) else float(row.C),
                seconds=float(row.seconds),
            )
        )
    return run_log


def write_groupwise_history(path: PathLike, run_log: RunLog) -> Optional[Path]:
    """``epoch,m,n,value`` rows for every group-wise snapshot; nothing when there are none."""
    if not run_log.groupwise:
        return None
    frames = [groupwise_snapshot_rows(epoch, matrix) for epoch, matrix in sorted(run_log.groupwise.items())]
    return atomic_write_text(path, pd.concat(frames, ignore_index=True).to_csv(index=False, float_format="%.10g"))


def write_manifest(path: PathLike, config: RunConfig, kind: str, settings: Optional[Settings] = None) -> Path:
    active = settings or get_settings()
    manifest = {
        "kind": kind,
        "config_digest": config_digest(config).hex(),
        "seed": config.seed,
        "code_version": active.code_version,
        "config": config.model_dump(mode="json", exclude=set(PATH_FIELDS)),
    }
    return atomic_write_bytes(path, orjson.dumps(manifest, option=orjson.OPT_SORT_KEYS | orjson.OPT_INDENT_2))
