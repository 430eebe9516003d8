"""Adam optimizer over named parameter blocks with hand-derived gradients."""

from dataclasses import dataclass, replace
from typing import Dict, Optional, Tuple

import numpy as np

from .numerics import check_finite, check_same_shape


@dataclass(frozen=True)
class AdamState:
    """Moment estimates and step counter for one parameter block."""

    m: np.ndarray
    v: np.ndarray
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params: np.ndarray, lr: float = 1e-3, **hyper) -> "AdamState":
        return cls(
            m=np.zeros(params.shape, dtype=np.float64),
            v=np.zeros(params.shape, dtype=np.float64),
            lr=lr,
            **hyper,
        )


def adam_step(
    params: np.ndarray,
    grads: np.ndarray,
    state: AdamState,
    weight_decay: float = 0.0,
    name: str = "params",
) -> Tuple[np.ndarray, AdamState]:
    """
    One bias-corrected Adam update; returns new parameters and state.

    Moments are kept in float64, parameters keep their own dtype. Weight decay is
    decoupled (applied to the parameters, not folded into the gradient).
    """
    check_same_shape(f"{name} gradient", params, grads)
    check_same_shape(f"{name} first moment", params, state.m)
    check_finite(f"{name} gradient", grads)

    g = np.asarray(grads, dtype=np.float64)
    step = state.step + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * g
    v = state.beta2 * state.v + (1.0 - state.beta2) * (g * g)

    bc1 = 1.0 - state.beta1**step
    bc2 = 1.0 - state.beta2**step
    update = (state.lr / bc1) * m / (np.sqrt(v / bc2) + state.eps)

    current = np.asarray(params, dtype=np.float64)
    if weight_decay:
        current = current - state.lr * weight_decay * current
    new_params = (current - update).astype(params.dtype)
    return new_params, replace(state, m=m, v=v, step=step)


class AdamOptimizer:
    """Applies ``adam_step`` to a dictionary of named parameter blocks."""

    def __init__(
        self,
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        weight_decay: Optional[Dict[str, float]] = None,
    ):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay or {}
        self.states: Dict[str, AdamState] = {}

    def step(self, params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray]) -> Dict[str, np.ndarray]:
        """Update every block that has a gradient; returns the new parameter dict."""
        updated = dict(params)
        for name in sorted(grads):
            if name not in self.states:
                self.states[name] = AdamState.zeros_like(
                    params[name], lr=self.lr, beta1=self.beta1, beta2=self.beta2, eps=self.eps
                )
            updated[name], self.states[name] = adam_step(
                params[name],
                grads[name],
                self.states[name],
                weight_decay=self.weight_decay.get(name, 0.0),
                name=name,
            )
        return updated
