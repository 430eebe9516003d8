"""Data module - Interaction files and dataset snapshots on disk."""

import logging
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np

from pckd.shared.exceptions import DomainError, InputParseError
from pckd.shared.files import atomic_write_text

from .models import Dataset, IdMaps, Interaction, InteractionLog, SplitRecords

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
SPLIT_NAMES = ("train", "val", "test")


def _detect_separator(line: str) -> str:
    return "\t" if "\t" in line else ","


def _parse_line(line: str, separator: str, number: int) -> Tuple[str, str, int]:
    fields = [part.strip() for part in line.split(separator)]
    if len(fields) != 3 or not fields[0] or not fields[1]:
        raise InputParseError(number, "Expected user, item and timestamp", {"content": line[:80]})
    try:
        timestamp = int(fields[2])
    except ValueError:
        raise InputParseError(number, "Timestamp is not an integer", {"content": line[:80]}) from None
    if timestamp < 0:
        raise InputParseError(number, "Timestamp is negative", {"content": line[:80]})
    return fields[0], fields[1], timestamp


def read_utf8(path: PathLike) -> str:
    """File contents as text; undecodable bytes are a parse error at their line."""
    raw = Path(path).read_bytes()
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        line = raw.count(b"\n", 0, exc.start) + 1
        raise InputParseError(
            line, "Invalid UTF-8", {"path": str(path), "offset": exc.start, "byte": f"0x{raw[exc.start]:02x}"}
        ) from None


def load_interactions(path: PathLike) -> InteractionLog:
    """
    Read ``user<SEP>item<SEP>timestamp`` lines.

    The separator (comma or tab) is detected on the first data line. ``#`` lines and
    blank lines are skipped; CRLF and LF endings parse identically.
    """
    text = read_utf8(path)
    records: List[Interaction] = []
    separator = None
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if separator is None:
            separator = _detect_separator(line)
        records.append(Interaction(*_parse_line(line, separator, number)))
    if not records:
        raise DomainError("Interaction file contains no records", {"path": str(path)})
    logger.debug(f"Loaded {len(records)} interactions from {path}")
    return InteractionLog(tuple(records))


def save_interactions(path: PathLike, log: InteractionLog) -> Path:
    lines = [f"{r.user},{r.item},{r.timestamp}" for r in log.records]
    return atomic_write_text(path, "\n".join(lines) + "\n")


class DatasetRepository:
    """Dataset snapshot directory: ``meta``, split files and id maps."""

    def __init__(self, root: PathLike):
        self.root = Path(root)

    def save(self, dataset: Dataset) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        meta = {
            "n_users": dataset.n_users,
            "n_items": dataset.n_items,
            "ratio_train": dataset.ratios[0],
            "ratio_val": dataset.ratios[1],
            "ratio_test": dataset.ratios[2],
            "n_train": len(dataset.train_records),
            "n_val": len(dataset.val_records),
            "n_test": len(dataset.test_records),
            "dropped_val": dataset.dropped.get("val", 0),
            "dropped_test": dataset.dropped.get("test", 0),
        }
        atomic_write_text(self.root / "meta", "".join(f"{k}={v}\n" for k, v in meta.items()))
        for name in SPLIT_NAMES:
            records: SplitRecords = getattr(dataset, f"{name}_records")
            rows = zip(records.users.tolist(), records.items.tolist(), records.timestamps.tolist())
            atomic_write_text(self.root / name, "".join(f"{u},{i},{t}\n" for u, i, t in rows))
        for side, mapping in (("user_map", dataset.id_maps.users), ("item_map", dataset.id_maps.items)):
            ordered = sorted(mapping.items(), key=lambda kv: kv[1])
            atomic_write_text(self.root / side, "".join(f"{raw},{dense}\n" for raw, dense in ordered))
        logger.info(f"Saved dataset snapshot to {self.root}")
        return self.root

    def _read_meta(self) -> dict:
        meta = {}
        for line in read_utf8(self.root / "meta").splitlines():
            if line.strip() and not line.startswith("#"):
                key, _, value = line.partition("=")
                meta[key.strip()] = value.strip()
        return meta

    def _read_split(self, name: str) -> SplitRecords:
        path = self.root / name
        if not path.exists() or not read_utf8(path).strip():
            return SplitRecords.empty()
        log = load_interactions(path)
        return SplitRecords(
            np.array([int(r.user) for r in log.records], dtype=np.int64),
            np.array([int(r.item) for r in log.records], dtype=np.int64),
            np.array([r.timestamp for r in log.records], dtype=np.int64),
        )

    def _read_map(self, name: str) -> dict:
        path = self.root / name
        if not path.exists():
            return {}
        mapping = {}
        for line in read_utf8(path).splitlines():
            if line.strip():
                raw, _, dense = line.rpartition(",")
                mapping[raw] = int(dense)
        return mapping

    def load(self) -> Dataset:
        if not (self.root / "meta").exists():
            raise DomainError("Not a dataset snapshot directory", {"path": str(self.root)})
        meta = self._read_meta()
        return Dataset(
            n_users=int(meta["n_users"]),
            n_items=int(meta["n_items"]),
            train_records=self._read_split("train"),
            val_records=self._read_split("val"),
            test_records=self._read_split("test"),
            id_maps=IdMaps(users=self._read_map("user_map"), items=self._read_map("item_map")),
            ratios=(float(meta["ratio_train"]), float(meta["ratio_val"]), float(meta["ratio_test"])),
            dropped={"val": int(meta.get("dropped_val", 0)), "test": int(meta.get("dropped_test", 0))},
        )
