"""
PCKD - preference-consistent knowledge distillation for top-N recommendation.

Command-line entry point that composes every module's verbs.
Run with: python -m pckd <verb> [flags]
"""

import argparse
import logging
import sys
from typing import List, Optional

from pckd.core.config import settings
from pckd.core.log import setup_logging
from pckd.shared.exceptions import PckdException, exit_code_for

# Import module verbs
from pckd.modules.data.cli import register as register_data
from pckd.modules.diagnostics.cli import register as register_diagnostics
from pckd.modules.evaluation.cli import register as register_evaluation
from pckd.modules.trainer.cli import register as register_trainer

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=settings.app_name,
        description="Feature distillation with preference-consistency regularizers for top-N recommendation.",
    )
    parser.add_argument("--version", action="version", version=settings.code_version)
    parser.add_argument("--log-level", default=None, help=f"Logging level (default {settings.log_level})")
    subparsers = parser.add_subparsers(dest="verb", metavar="verb", required=True)

    register_data(subparsers)
    register_trainer(subparsers)
    register_evaluation(subparsers)
    register_diagnostics(subparsers)
    return parser


def dispatch(argv: Optional[List[str]] = None) -> int:
    """Parse ``argv``, run the verb and return the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse has already printed usage (2) or help/version (0)
        return int(exc.code or 0)

    setup_logging(settings, args.log_level)
    try:
        return int(args.func(args) or 0)
    except PckdException as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code_for(exc)
    except OSError as exc:
        logger.debug("I/O failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
