"""Trainer module - ``train-teacher``, ``distill`` and ``grid`` verbs."""

import argparse
import logging
from typing import Any, Dict

from pckd.modules.distill import HybridSampling, SamplingMode
from pckd.shared.schemas import BackboneKind

from .repository import build_run_config, method_overrides, read_grid_spec
from .schemas import RunConfig
from .service import TrainerService

logger = logging.getLogger(__name__)

METHODS = ("none", "fitnet", "de", "pckd_p", "pckd_l", "pckd_h")

# argparse dest -> RunConfig / PckdConfig field
FLAG_FIELDS = {
    "data": "data",
    "teacher": "teacher",
    "out": "out",
    "seed": "seed",
    "backbone": "backbone",
    "dim": "d_teacher",
    "d_teacher": "d_teacher",
    "d_student": "d_student",
    "layers": "n_layers",
    "lr": "lr",
    "weight_decay": "weight_decay",
    "batch_size": "batch_size",
    "max_epochs": "max_epochs",
    "patience": "patience",
    "experts": "n_experts",
    "projector_layers": "projector_layers",
    "N": "Ns",
    "diagnostics_every": "diagnostics_every",
    "groupwise_every": "groupwise_every",
    "pairs": "diagnostic_pairs",
    "cells_pairs": "diagnostic_cell_pairs",
    "sampling": "sampling_mode",
    "hybrid": "hybrid_sampling",
    "Q": "Q",
    "T": "T",
    "T1": "T1",
    "T2": "T2",
    "alpha": "alpha",
    "lambda_de": "lambda_de",
    "lambda_pckd": "lambda_pckd",
    "pckd_reduction": "reduction",
    "K": "rank_refresh_K",
    "detach_targets": "detach_targets",
    "wall_time": "record_wall_time",
}


def collect_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Flags the user actually gave, keyed by config field."""
    overrides: Dict[str, Any] = {}
    for dest, field in FLAG_FIELDS.items():
        value = getattr(args, dest, None)
        if value is not None:
            overrides[field] = value
    if getattr(args, "method", None):
        overrides.update(method_overrides(args.method))
    return overrides


def _config(args: argparse.Namespace) -> RunConfig:
    return build_run_config(collect_overrides(args), args.config)


def cmd_train_teacher(args: argparse.Namespace) -> int:
    config = _config(args)
    outcome = TrainerService().train_teacher(config)
    print(f"best_epoch={outcome.best_epoch}")
    print(f"best_val_ndcg@{config.selection_cutoff}={outcome.best_val:.6f}")
    if outcome.test is not None:
        print(outcome.test.as_lines())
    if outcome.checkpoint_path is not None:
        print(f"checkpoint={outcome.checkpoint_path}")
    return 0


def cmd_distill(args: argparse.Namespace) -> int:
    config = _config(args)
    outcome = TrainerService().distill(config)
    print(f"best_epoch={outcome.best_epoch}")
    print(f"best_val_ndcg@{config.selection_cutoff}={outcome.best_val:.6f}")
    if outcome.test is not None:
        print(outcome.test.as_lines())
    if outcome.final_c is not None:
        print(f"C={outcome.final_c:.6f}")
    if outcome.checkpoint_path is not None:
        print(f"checkpoint={outcome.checkpoint_path}")
    return 0


def cmd_grid(args: argparse.Namespace) -> int:
    spec = read_grid_spec(args.spec)
    if args.workers is not None:
        spec = spec.model_copy(update={"max_workers": args.workers})
    summary = TrainerService().run_experiment_grid(spec)
    print(summary.to_string(index=False))
    failed = int((summary["status"] != "ok").sum())
    if failed:
        logger.warning(f"{failed} of {len(summary)} grid cells failed")
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None, help="key=value config file (flags override it)")
    parser.add_argument("--data", default=None, help="Dataset snapshot directory")
    parser.add_argument("--out", default=None, help="Output directory")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--backbone", choices=[kind.value for kind in BackboneKind], default=None)
    parser.add_argument("--layers", type=int, default=None, help="LightGCN propagation layers")
    parser.add_argument("--lr", type=float, default=None)
    parser.add_argument("--weight-decay", type=float, default=None)
    parser.add_argument("--batch-size", type=int, default=None)
    parser.add_argument("--max-epochs", type=int, default=None)
    parser.add_argument("--patience", type=int, default=None)
    parser.add_argument("--N", default=None, help="Comma-separated cutoffs, e.g. 10,20")
    parser.add_argument("--wall-time", action=argparse.BooleanOptionalAction, default=None)


def register(subparsers) -> None:
    teacher = subparsers.add_parser("train-teacher", help="Train the full-dimension teacher backbone")
    _add_common(teacher)
    teacher.add_argument("--dim", type=int, default=None, help="Teacher embedding dimension")
    teacher.set_defaults(func=cmd_train_teacher)

    distill = subparsers.add_parser("distill", help="Distill a low-dimension student from a teacher")
    _add_common(distill)
    distill.add_argument("--teacher", default=None, help="Teacher checkpoint")
    distill.add_argument("--method", choices=METHODS, default=None)
    distill.add_argument("--d-teacher", type=int, default=None)
    distill.add_argument("--d-student", type=int, default=None)
    distill.add_argument("--experts", type=int, default=None)
    distill.add_argument("--projector-layers", type=int, default=None)
    distill.add_argument("--sampling", choices=[mode.value for mode in SamplingMode], default=None)
    distill.add_argument("--hybrid", choices=[mode.value for mode in HybridSampling], default=None)
    distill.add_argument("--Q", type=int, default=None)
    distill.add_argument("--T", type=float, default=None)
    distill.add_argument("--T1", type=float, default=None)
    distill.add_argument("--T2", type=float, default=None)
    distill.add_argument("--alpha", type=float, default=None)
    distill.add_argument("--lambda-de", type=float, default=None)
    distill.add_argument("--lambda-pckd", type=float, default=None)
    distill.add_argument("--pckd-reduction", choices=["mean", "sum"], default=None)
    distill.add_argument("--K", type=int, default=None, help="Rank table refresh period in epochs")
    distill.add_argument("--detach-targets", action=argparse.BooleanOptionalAction, default=None)
    distill.add_argument("--diagnostics-every", type=int, default=None)
    distill.add_argument("--groupwise-every", type=int, default=None)
    distill.add_argument("--pairs", type=int, default=None)
    distill.add_argument("--cells-pairs", type=int, default=None)
    distill.set_defaults(func=cmd_distill)

    grid = subparsers.add_parser("grid", help="Run distill over a JSON grid spec")
    grid.add_argument("--spec", required=True, help="Grid spec (JSON)")
    grid.add_argument("--workers", type=int, default=None)
    grid.set_defaults(func=cmd_grid)
