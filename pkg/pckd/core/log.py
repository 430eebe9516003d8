"""Logging setup shared by the command line and long-running services."""

import logging
from typing import Optional

from .config import Settings, settings as default_settings

_configured = False


def setup_logging(settings: Optional[Settings] = None, level: Optional[str] = None) -> None:
    """Configure the root logger once (stderr handler, level from settings)."""
    global _configured
    active = settings or default_settings
    resolved = (level or active.log_level).upper()
    if _configured:
        logging.getLogger().setLevel(resolved)
        return
    logging.basicConfig(level=resolved, format=active.log_format)
    _configured = True
