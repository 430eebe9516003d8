"""Central finite differences as the oracle for every hand-derived gradient."""

from typing import Callable

import numpy as np

from pckd.shared.exceptions import ConfigurationError, NumericError

from .numerics import check_same_shape


def numeric_gradient(loss_fn: Callable[[np.ndarray], float], params: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function, evaluated in float64."""
    base = np.array(params, dtype=np.float64)
    grad = np.zeros_like(base)
    flat = base.reshape(-1)
    out = grad.reshape(-1)
    for index in range(flat.size):
        original = flat[index]
        flat[index] = original + eps
        plus = float(loss_fn(base))
        flat[index] = original - eps
        minus = float(loss_fn(base))
        flat[index] = original
        if not (np.isfinite(plus) and np.isfinite(minus)):
            raise NumericError("Non-finite loss at perturbed point", {"coordinate": index})
        out[index] = (plus - minus) / (2.0 * eps)
    return grad


def finite_diff_check(
    loss_fn: Callable[[np.ndarray], float],
    analytic_grad: np.ndarray,
    params: np.ndarray,
    eps: float = 1e-5,
    atol: float = 1e-8,
) -> float:
    """
    Max over coordinates of ``|numeric - analytic| / (|analytic| + atol)``.

    ``loss_fn`` must be pure: it receives a float64 copy of ``params``.
    """
    if not 1e-6 <= eps <= 1e-3:
        raise ConfigurationError("eps must lie in [1e-6, 1e-3]", {"eps": eps})
    check_same_shape("analytic gradient", params, analytic_grad)
    numeric = numeric_gradient(loss_fn, params, eps)
    analytic = np.asarray(analytic_grad, dtype=np.float64)
    if numeric.size == 0:
        return 0.0
    return float(np.max(np.abs(numeric - analytic) / (np.abs(analytic) + atol)))


def assert_gradient_close(
    loss_fn: Callable[[np.ndarray], float],
    analytic_grad: np.ndarray,
    params: np.ndarray,
    eps: float = 1e-6,
    rtol: float = 1e-5,
    atol: float = 1e-8,
) -> None:
    """Fail unless every coordinate satisfies ``|numeric - analytic| <= atol + rtol * |analytic|``."""
    check_same_shape("analytic gradient", params, analytic_grad)
    numeric = numeric_gradient(loss_fn, params, eps)
    np.testing.assert_allclose(numeric, np.asarray(analytic_grad, dtype=np.float64), rtol=rtol, atol=atol)
