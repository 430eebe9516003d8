"""Data module - ``synth`` and ``prep`` verbs."""

import argparse
import logging

from pckd.shared.schemas import validate_config

from .repository import DatasetRepository, load_interactions, save_interactions
from .schemas import DataConfig, SplitMode, SyntheticConfig
from .service import chrono_split, generate_synthetic, preprocess

logger = logging.getLogger(__name__)


def cmd_synth(args: argparse.Namespace) -> int:
    config = validate_config(
        SyntheticConfig,
        {
            "n_users": args.users,
            "n_items": args.items,
            "latent_dim": args.latent_dim,
            "density": args.density,
            "seed": args.seed,
        },
    )
    log = generate_synthetic(**config.model_dump())
    path = save_interactions(args.out, log)
    print(f"interactions={len(log)}")
    print(f"out={path}")
    return 0


def cmd_prep(args: argparse.Namespace) -> int:
    config = validate_config(
        DataConfig,
        {"min_interactions": args.min_interactions, "ratios": args.ratios, "split_mode": args.split_mode},
    )
    log, id_maps = preprocess(load_interactions(args.input), config.min_interactions)
    dataset = chrono_split(log, id_maps, config.ratios, config.split_mode)
    DatasetRepository(args.out).save(dataset)
    print(f"users={dataset.n_users}")
    print(f"items={dataset.n_items}")
    print(f"train={len(dataset.train_records)} val={len(dataset.val_records)} test={len(dataset.test_records)}")
    print(f"dropped_val={dataset.dropped.get('val', 0)} dropped_test={dataset.dropped.get('test', 0)}")
    return 0


def _ratios(text: str):
    parts = [float(part) for part in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("ratios take three comma-separated values, e.g. 0.8,0.1,0.1")
    return tuple(parts)


def register(subparsers) -> None:
    synth = subparsers.add_parser("synth", help="Generate a latent-factor synthetic interaction log")
    synth.add_argument("--users", type=int, default=200)
    synth.add_argument("--items", type=int, default=500)
    synth.add_argument("--density", type=float, default=0.02)
    synth.add_argument("--latent-dim", type=int, default=16)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--out", required=True, help="Interaction file to write (user,item,timestamp)")
    synth.set_defaults(func=cmd_synth)

    prep = subparsers.add_parser("prep", help="Filter, remap and split an interaction log into a dataset")
    prep.add_argument("--in", dest="input", required=True, help="Interaction file (comma or tab separated)")
    prep.add_argument("--out", required=True, help="Dataset snapshot directory")
    prep.add_argument("--min-interactions", type=int, default=10)
    prep.add_argument("--ratios", type=_ratios, default=(0.8, 0.1, 0.1))
    prep.add_argument("--split-mode", choices=[mode.value for mode in SplitMode], default=SplitMode.GLOBAL.value)
    prep.set_defaults(func=cmd_prep)
