"""Dense-array helpers: shape and finiteness guards plus stable elementwise functions."""

from typing import Optional, Sequence

import numpy as np
from scipy.special import expit, log_expit, log_softmax, softmax

from pckd.shared.exceptions import ConfigurationError, NumericError

__all__ = [
    "expit",
    "log_softmax",
    "softmax",
    "neg_log_sigmoid",
    "pref_sign",
    "check_finite",
    "check_shape",
    "check_same_shape",
    "as_float64",
    "uniform_init",
]


def neg_log_sigmoid(x: np.ndarray) -> np.ndarray:
    """Elementwise ``-log(sigmoid(x))`` (softplus of ``-x``) without overflow."""
    return -log_expit(np.asarray(x, dtype=np.float64))


def pref_sign(diff: np.ndarray) -> np.ndarray:
    """Sign with ``sign(0) = +1``: -1 where ``diff < 0`` and +1 otherwise."""
    return np.where(np.asarray(diff) < 0, -1.0, 1.0)


def check_finite(name: str, array: np.ndarray, **context) -> None:
    """Raise ``NumericError`` naming the block if any entry is NaN or infinite."""
    if not np.all(np.isfinite(array)):
        bad = int(np.size(array) - np.count_nonzero(np.isfinite(array)))
        raise NumericError(f"Non-finite values in {name}", {"block": name, "count": bad, **context})


def check_shape(name: str, array: np.ndarray, shape: Sequence[Optional[int]]) -> None:
    """Raise ``ConfigurationError`` unless ``array`` matches ``shape`` (None = any)."""
    actual = np.shape(array)
    if len(actual) != len(shape) or any(
        want is not None and got != want for got, want in zip(actual, shape)
    ):
        raise ConfigurationError(
            f"Shape mismatch for {name}",
            {"expected": tuple(shape), "actual": tuple(actual)},
        )


def check_same_shape(name: str, left: np.ndarray, right: np.ndarray) -> None:
    if np.shape(left) != np.shape(right):
        raise ConfigurationError(
            f"Shape mismatch for {name}",
            {"left": tuple(np.shape(left)), "right": tuple(np.shape(right))},
        )


def as_float64(array: np.ndarray) -> np.ndarray:
    return np.asarray(array, dtype=np.float64)


def uniform_init(
    generator: np.random.Generator,
    shape: Sequence[int],
    bound: float,
    dtype: str = "float32",
) -> np.ndarray:
    """Draw ``uniform(-bound, bound)`` entries; draws happen in float64 for portability."""
    return generator.uniform(-bound, bound, size=tuple(shape)).astype(dtype)
