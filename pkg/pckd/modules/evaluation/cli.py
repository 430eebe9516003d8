"""Evaluation module - ``eval`` verb."""

import argparse
import logging

from pckd.modules.backbones import check_matches_dataset, load_checkpoint, model_from_checkpoint
from pckd.modules.data import DatasetRepository
from pckd.shared.schemas import Split

from .service import evaluate

logger = logging.getLogger(__name__)


def _cutoffs(text: str):
    try:
        values = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise argparse.ArgumentTypeError("cutoffs are comma-separated integers, e.g. 10,20") from None
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError("cutoffs must be positive")
    return values


def cmd_eval(args: argparse.Namespace) -> int:
    dataset = DatasetRepository(args.data).load()
    checkpoint = load_checkpoint(args.ckpt)
    check_matches_dataset(checkpoint, dataset.n_users, dataset.n_items, args.ckpt)
    model = model_from_checkpoint(checkpoint, dataset.train_records.users, dataset.train_records.items)
    result = evaluate(model, dataset, Split(args.split), args.N)
    print(result.as_lines())
    return 0


def register(subparsers) -> None:
    parser = subparsers.add_parser("eval", help="Full-ranking Recall@N / NDCG@N of a checkpoint")
    parser.add_argument("--data", required=True, help="Dataset snapshot directory")
    parser.add_argument("--ckpt", required=True, help="Checkpoint to evaluate")
    parser.add_argument("--split", choices=[split.value for split in Split], default=Split.TEST.value)
    parser.add_argument("--N", type=_cutoffs, default=(10, 20))
    parser.set_defaults(func=cmd_eval)
