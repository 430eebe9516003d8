"""Diagnostics module - ``diagnose`` verb."""

import argparse
import logging

from pckd.core.config import get_settings
from pckd.core.rng import StreamFactory
from pckd.modules.backbones import check_matches_dataset, load_checkpoint, model_from_checkpoint
from pckd.modules.data import DatasetRepository
from pckd.modules.distill import rebuild_rank_table
from pckd.modules.projectors import decode_banks
from pckd.shared.exceptions import ConfigurationError

from .models import ProjectedScorer
from .repository import write_groupwise
from .service import diagnose

logger = logging.getLogger(__name__)


def cmd_diagnose(args: argparse.Namespace) -> int:
    dataset = DatasetRepository(args.data).load()
    users, items = dataset.train_records.users, dataset.train_records.items
    student_ckpt = load_checkpoint(args.student)
    check_matches_dataset(student_ckpt, dataset.n_users, dataset.n_items, args.student)
    user_bank, item_bank = decode_banks(student_ckpt.blocks, student_ckpt.dtype)
    if user_bank is None or item_bank is None:
        raise ConfigurationError("Student checkpoint carries no projector blocks", {"path": args.student})
    student = model_from_checkpoint(student_ckpt, users, items)

    teacher = None
    if args.teacher is not None:
        teacher_ckpt = load_checkpoint(args.teacher, expected_kind=student_ckpt.kind, expected_dim=user_bank.teacher_dim)
        check_matches_dataset(teacher_ckpt, dataset.n_users, dataset.n_items, args.teacher)
        teacher = model_from_checkpoint(teacher_ckpt, users, items)

    scorer = ProjectedScorer.from_models(student, user_bank, item_bank, teacher)
    seed = args.seed if args.seed is not None else get_settings().default_seed
    report = diagnose(
        scorer,
        rebuild_rank_table(student),
        StreamFactory(seed).stream("diagnostics"),
        pairs_per_user=args.pairs,
        pairs_per_cell=args.cells_pairs,
    )
    print(f"C={report.C:.6f}")
    if args.out is not None and report.groupwise is not None:
        path = write_groupwise(args.out, report.groupwise)
        print(f"groupwise={path}")
    return 0


def register(subparsers) -> None:
    parser = subparsers.add_parser("diagnose", help="Preference inconsistency of a distilled student")
    parser.add_argument("--data", required=True, help="Dataset snapshot directory")
    parser.add_argument("--student", required=True, help="Student checkpoint (with projector blocks)")
    parser.add_argument("--teacher", default=None, help="Teacher checkpoint (needed when the student has K > 1)")
    parser.add_argument("--pairs", type=int, default=100)
    parser.add_argument("--cells-pairs", type=int, default=50)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", default=None, help="Group-wise CSV to write")
    parser.set_defaults(func=cmd_diagnose)
