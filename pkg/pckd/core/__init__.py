"""Core module - Settings, logging, random streams, optimizer, gradient oracle."""

from .config import Settings, get_settings, settings
from .gradcheck import assert_gradient_close, finite_diff_check, numeric_gradient
from .log import setup_logging
from .optim import AdamOptimizer, AdamState, adam_step
from .rng import RngStream, StreamFactory, rng_draw_categorical

__all__ = [
    "Settings",
    "get_settings",
    "settings",
    "setup_logging",
    "assert_gradient_close",
    "finite_diff_check",
    "numeric_gradient",
    "AdamOptimizer",
    "AdamState",
    "adam_step",
    "RngStream",
    "StreamFactory",
    "rng_draw_categorical",
]
