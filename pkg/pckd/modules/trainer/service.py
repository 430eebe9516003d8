"""Trainer module - Teacher pretraining, distillation loop and experiment grids."""

import copy
import itertools
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from pckd.core.config import Settings, get_settings
from pckd.core.optim import AdamOptimizer
from pckd.core.rng import StreamFactory
from pckd.modules.backbones import (
    Checkpoint,
    CheckpointRepository,
    decode_checkpoint,
    encode_checkpoint,
    init_model,
    model_from_checkpoint,
)
from pckd.modules.data import Dataset, DatasetRepository, iterate_epoch
from pckd.modules.diagnostics import ProjectedScorer, estimate_inconsistency, groupwise_inconsistency
from pckd.modules.distill import DistillationObjective, KdMethod, PckdConfig, PckdMethod, rebuild_rank_table
from pckd.modules.evaluation import EarlyStopTracker, evaluate, metric_rows
from pckd.modules.projectors import ExpertBank, encode_banks, init_bank
from pckd.shared.exceptions import ConfigurationError, NumericError, PckdException
from pckd.shared.files import atomic_write_text
from pckd.shared.schemas import Split, validate_config

from .models import EpochRecord, Model, RunLog, RunOutcome
from .repository import config_digest, merge_config, write_groupwise_history, write_manifest, write_run_log
from .schemas import GridSpec, RunConfig

logger = logging.getLogger(__name__)

TEACHER_FILE = "teacher.ckpt"
STUDENT_FILE = "student.ckpt"


class TrainerService:
    """Runs the training algorithm end to end and writes each run's outputs."""

    def __init__(self, settings: Optional[Settings] = None):
        self.settings = settings or get_settings()
        self.checkpoints = CheckpointRepository()

    # ============== Inputs ==============

    def load_dataset(self, config: RunConfig) -> Dataset:
        if config.data is None:
            raise ConfigurationError("No dataset given (data path is required)")
        return DatasetRepository(config.data).load()

    def load_teacher(self, config: RunConfig, dataset: Dataset, checkpoint: Optional[Checkpoint] = None) -> Model:
        """Teacher model compatible with ``config`` and ``dataset``."""
        if checkpoint is None:
            if config.teacher is None:
                raise ConfigurationError("Distillation needs a teacher checkpoint")
            checkpoint = self.checkpoints.load(config.teacher)
        if checkpoint.kind != config.backbone:
            raise ConfigurationError(
                "Teacher backbone does not match the run",
                {"teacher": checkpoint.kind.value, "expected": config.backbone.value},
            )
        if checkpoint.dim != config.d_teacher:
            raise ConfigurationError("Teacher dimension does not match d_teacher", {"teacher": checkpoint.dim})
        if (checkpoint.n_users, checkpoint.n_items) != (dataset.n_users, dataset.n_items):
            raise ConfigurationError(
                "Teacher was trained on a different dataset",
                {"teacher": (checkpoint.n_users, checkpoint.n_items), "dataset": (dataset.n_users, dataset.n_items)},
            )
        return model_from_checkpoint(checkpoint, dataset.train_records.users, dataset.train_records.items)

    def _init_backbone(self, config: RunConfig, dataset: Dataset, dim: int, streams: StreamFactory, key: int) -> Model:
        return init_model(
            config.backbone,
            dataset.n_users,
            dataset.n_items,
            dim,
            streams.stream("init", key),
            dataset.train_records.users,
            dataset.train_records.items,
            n_layers=config.n_layers,
            dtype=self.settings.float_dtype,
        )

    def _init_banks(self, config: RunConfig, streams: StreamFactory) -> Tuple[ExpertBank, ExpertBank]:
        n_experts = 1 if config.kd_method == KdMethod.FITNET else config.n_experts
        banks = []
        for side in (0, 1):
            banks.append(
                init_bank(
                    config.d_student,
                    config.d_teacher,
                    n_experts,
                    streams.stream("init", 2 + side),
                    n_layers=config.projector_layers,
                    temperature_start=config.temperature_start,
                    temperature_end=config.temperature_end,
                    anneal_epochs=max(config.max_epochs, 1),
                    dtype=self.settings.float_dtype,
                )
            )
        return banks[0], banks[1]

    # ============== Operations ==============

    def train_teacher(self, config: RunConfig, dataset: Optional[Dataset] = None) -> RunOutcome:
        """Train the backbone at ``d_teacher`` with the base loss only."""
        dataset = dataset if dataset is not None else self.load_dataset(config)
        streams = StreamFactory(config.seed)
        model = self._init_backbone(config, dataset, config.d_teacher, streams, 0)
        objective = DistillationObjective(model, PckdConfig(lambda_de=0.0, lambda_pckd=0.0), KdMethod.NONE)
        logger.info(f"Training {config.backbone.value} teacher (d={config.d_teacher}) for up to {config.max_epochs} epochs")
        return self._fit(config, dataset, objective, streams, kind="teacher", out_name=TEACHER_FILE)

    def distill(
        self,
        config: RunConfig,
        teacher_checkpoint: Optional[Checkpoint] = None,
        dataset: Optional[Dataset] = None,
    ) -> RunOutcome:
        """Distill a ``d_student`` model from a frozen teacher with the configured regularizer."""
        dataset = dataset if dataset is not None else self.load_dataset(config)
        streams = StreamFactory(config.seed)
        student = self._init_backbone(config, dataset, config.d_student, streams, 1)
        if config.kd_method == KdMethod.NONE:
            objective = DistillationObjective(student, config.pckd, KdMethod.NONE)
            teacher = None
        else:
            teacher = self.load_teacher(config, dataset, teacher_checkpoint)
            user_bank, item_bank = self._init_banks(config, streams)
            objective = DistillationObjective(student, config.pckd, config.kd_method, teacher, user_bank, item_bank)
        logger.info(
            f"Distilling d={config.d_student} student with kd={config.kd_method.value} pckd={config.pckd.method.value}"
        )
        return self._fit(config, dataset, objective, streams, kind="student", out_name=STUDENT_FILE, teacher=teacher)

    # ============== Training loop ==============

    def _fit(
        self,
        config: RunConfig,
        dataset: Dataset,
        objective: DistillationObjective,
        streams: StreamFactory,
        kind: str,
        out_name: str,
        teacher: Optional[Model] = None,
    ) -> RunOutcome:
        model = objective.student
        digest = config_digest(config)
        optimizer = AdamOptimizer(
            lr=config.lr,
            weight_decay={"user_emb": config.weight_decay, "item_emb": config.weight_decay},
        )
        tracker = EarlyStopTracker(config.patience)
        cutoff = config.selection_cutoff
        uses_ranks = objective.config.method != PckdMethod.NONE
        refresh = objective.config.rank_refresh_K

        run_log = RunLog()
        metric_frames: List[pd.DataFrame] = []
        rank_rebuilds: List[int] = []
        rank_table = None
        best_params = copy.deepcopy(objective.parameters())
        best_epoch, best_val = -1, float("-inf")

        if config.max_epochs == 0:
            logger.warning("max_epochs is 0; returning the initial model")

        for epoch in range(config.max_epochs):
            started = time.perf_counter()
            if uses_ranks and epoch % refresh == 0:
                rank_table = rebuild_rank_table(model, epoch)
                rank_rebuilds.append(epoch)

            sums = np.zeros(3)
            n_batches = 0
            for batch_index, batch in enumerate(iterate_epoch(dataset, config.batch_size, streams.stream("batching", epoch))):
                try:
                    losses = objective.compute(batch, epoch, batch_index, streams, rank_table)
                    objective.load_parameters(optimizer.step(objective.parameters(), losses.grads))
                except NumericError as exc:
                    logger.error(f"Aborting {kind} run at epoch {epoch}, batch {batch_index}: {exc}")
                    raise
                sums += (losses.base, losses.de, losses.pckd)
                n_batches += 1
            means = sums / max(n_batches, 1)

            val = evaluate(model, dataset, Split.VAL, config.Ns)
            metric_frames.append(metric_rows(epoch, val))
            val_score = val.ndcg(cutoff)
            c_value = self._diagnostics(config, objective, teacher, streams, epoch, run_log)

            decision = tracker.update(val_score)
            if decision.is_best:
                best_params = copy.deepcopy(objective.parameters())
                best_epoch, best_val = epoch, val_score

            seconds = time.perf_counter() - started if config.record_wall_time else 0.0
            run_log.append(EpochRecord(epoch, means[0], means[1], means[2], val_score, c_value, seconds))
            c_text = f" C={c_value:.4f}" if c_value is not None else ""
            logger.info(
                f"[{kind}] epoch {epoch}: base={means[0]:.5f} de={means[1]:.5f} pckd={means[2]:.5f} "
                f"val ndcg@{cutoff}={val_score:.5f}{c_text}"
            )
            if decision.stop:
                logger.info(f"Early stop at epoch {epoch}; best epoch {best_epoch}")
                break

        objective.load_parameters(best_params)
        blocks = None
        if objective.user_bank is not None:
            blocks = encode_banks(objective.user_bank, objective.item_bank, self.settings.float_dtype)
        # decode from bytes so the returned checkpoint is exactly what a reload would give
        checkpoint = decode_checkpoint(encode_checkpoint(model, config.seed, digest, blocks))

        test = evaluate(model, dataset, Split.TEST, config.Ns) if any(t.size for t in dataset.test) else None
        final_c = None
        if objective.user_bank is not None:
            final_epoch = max(best_epoch, 0)
            scorer = ProjectedScorer.from_models(model, objective.user_bank, objective.item_bank, teacher, final_epoch)
            final_c = estimate_inconsistency(
                scorer, config.diagnostic_pairs, streams.stream("diagnostics", 1), final_epoch
            ).C

        outcome = RunOutcome(
            model=model,
            checkpoint=checkpoint,
            run_log=run_log,
            best_epoch=best_epoch,
            best_val=best_val,
            test=test,
            final_c=final_c,
            user_bank=objective.user_bank,
            item_bank=objective.item_bank,
            rank_rebuilds=rank_rebuilds,
        )
        if config.out is not None:
            outcome.checkpoint_path = self._write_outputs(config, outcome, metric_frames, blocks, digest, kind, out_name)
        return outcome

    def _diagnostics(
        self,
        config: RunConfig,
        objective: DistillationObjective,
        teacher: Optional[Model],
        streams: StreamFactory,
        epoch: int,
        run_log: RunLog,
    ) -> Optional[float]:
        if objective.user_bank is None:
            return None
        every_c = config.diagnostics_every and epoch % config.diagnostics_every == 0
        every_g = config.groupwise_every and epoch % config.groupwise_every == 0
        if not (every_c or every_g):
            return None
        scorer = ProjectedScorer.from_models(objective.student, objective.user_bank, objective.item_bank, teacher, epoch)
        stream = streams.stream("diagnostics", 0)
        c_value = None
        if every_c:
            c_value = estimate_inconsistency(scorer, config.diagnostic_pairs, stream.child(0), epoch).C
        if every_g:
            table = rebuild_rank_table(objective.student, epoch)
            run_log.groupwise[epoch] = groupwise_inconsistency(
                scorer, table, config.diagnostic_cell_pairs, stream.child(1), epoch
            )
        return c_value

    def _write_outputs(
        self,
        config: RunConfig,
        outcome: RunOutcome,
        metric_frames: List[pd.DataFrame],
        blocks: Optional[Dict[int, bytes]],
        digest: bytes,
        kind: str,
        out_name: str,
    ) -> Path:
        out = Path(config.out)
        path = self.checkpoints.save(out / out_name, outcome.model, config.seed, digest, blocks)
        write_run_log(out / "run_log.csv", outcome.run_log)
        frames = list(metric_frames)
        if outcome.test is not None:
            frames.append(metric_rows(outcome.best_epoch, outcome.test))
        if frames:
            atomic_write_text(out / "metrics.csv", pd.concat(frames, ignore_index=True).to_csv(index=False))
        write_groupwise_history(out / "groupwise.csv", outcome.run_log)
        write_manifest(out / "manifest.json", config, kind, self.settings)
        logger.info(f"Wrote {kind} outputs to {out}")
        return path

    # ============== Grids ==============

    def run_experiment_grid(self, spec: GridSpec, base_overrides: Optional[Dict[str, Any]] = None) -> pd.DataFrame:
        """
        Run ``distill`` for every cell of the grid and return the summary table.

        A failing cell is recorded with its error and the grid continues. With
        ``max_workers > 1`` cells run in a process pool; rows stay in cell order.
        """
        cells = grid_cells(spec, base_overrides)
        if not cells:
            raise ConfigurationError("Grid has no cells")
        teacher_path = spec.teacher
        needs_teacher = any(cell["config"].get("kd_method", KdMethod.DE) != KdMethod.NONE for cell in cells)
        if needs_teacher and teacher_path is None:
            teacher_path = self._grid_teacher(spec, cells[0]["config"])

        payloads = [
            {
                "cell_id": cell["cell_id"],
                "values": cell["values"],
                "config": {
                    **cell["config"],
                    "data": spec.data,
                    "teacher": teacher_path,
                    "out": (Path(spec.out) / f"cell_{cell['cell_id']:03d}") if spec.out else None,
                },
            }
            for cell in cells
        ]
        if spec.max_workers > 1:
            with ProcessPoolExecutor(max_workers=spec.max_workers) as pool:
                rows = list(pool.map(_run_cell, payloads))
        else:
            rows = [_run_cell(payload) for payload in payloads]

        summary = pd.DataFrame(rows).sort_values("cell_id", kind="stable").reset_index(drop=True)
        if spec.out is not None:
            atomic_write_text(Path(spec.out) / "summary.csv", summary.to_csv(index=False, float_format="%.10g"))
        return summary

    def _grid_teacher(self, spec: GridSpec, base: Dict[str, Any]) -> Path:
        if spec.out is None:
            raise ConfigurationError("A grid without a teacher checkpoint needs an output directory")
        config = validate_config(RunConfig, {**base, "data": spec.data, "out": Path(spec.out) / "teacher"})
        logger.info("Grid spec has no teacher; training one first")
        outcome = self.train_teacher(config)
        return outcome.checkpoint_path


def grid_cells(spec: GridSpec, base_overrides: Optional[Dict[str, Any]] = None) -> List[Dict[str, Any]]:
    """Expand a grid spec into numbered cells (axes in spec order, seeds innermost)."""
    keys = list(spec.axes)
    value_lists = [spec.axes[key] for key in keys]
    seeds = spec.seeds or [None]
    cells = []
    for cell_id, (combo, seed) in enumerate(itertools.product(itertools.product(*value_lists), seeds)):
        values = dict(zip(keys, combo))
        if seed is not None:
            values["seed"] = seed
        config = merge_config({"seed": get_settings().default_seed}, spec.base, base_overrides or {}, values)
        cells.append({"cell_id": cell_id, "values": values, "config": config})
    return cells


def _run_cell(payload: Dict[str, Any]) -> Dict[str, Any]:
    """Run one grid cell; top-level so process pools can pickle it."""
    row: Dict[str, Any] = {"cell_id": payload["cell_id"], **payload["values"]}
    try:
        config = validate_config(RunConfig, payload["config"])
        row["seed"] = config.seed
        outcome = TrainerService().distill(config)
        row["best_val_ndcg20"] = outcome.best_val
        row["best_epoch"] = outcome.best_epoch
        if outcome.test is not None:
            for n, pair in sorted(outcome.test.metrics.items()):
                row[f"test_recall@{n}"] = pair.recall
                row[f"test_ndcg@{n}"] = pair.ndcg
        row["final_C"] = outcome.final_c
        row["status"] = "ok"
        row["error"] = ""
    except PckdException as exc:
        logger.error(f"Grid cell {payload['cell_id']} failed: {exc}")
        row["status"] = "failed"
        row["error"] = str(exc)
    except Exception as exc:
        logger.exception(f"Grid cell {payload['cell_id']} failed unexpectedly")
        row["status"] = "failed"
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row
