"""Projectors module - MLP projector and DE expert bank parameter containers."""

from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional

import numpy as np

from pckd.core.numerics import check_shape
from pckd.shared.exceptions import ConfigurationError
from pckd.shared.schemas import Mode


def gumbel_temperature(epoch: int, max_epochs: int, start: float = 1.0, end: float = 0.1) -> float:
    """Exponential anneal from ``start`` at epoch 0 to ``end`` at ``max_epochs``, flat afterwards."""
    progress = min(max(epoch, 0) / max(max_epochs, 1), 1.0)
    return float(start * (end / start) ** progress)


class MlpCache(NamedTuple):
    """Forward intermediates needed by ``MlpProjector.backward``."""

    inputs: List[np.ndarray]
    pre_activations: List[np.ndarray]


@dataclass
class MlpProjector:
    """Stack of affine layers ``x @ W + b`` with ReLU between layers, linear output."""

    weights: List[np.ndarray]
    biases: List[np.ndarray]

    def __post_init__(self) -> None:
        if not self.weights or len(self.weights) != len(self.biases):
            raise ConfigurationError("Projector needs matching weight and bias lists")
        for index, (weight, bias) in enumerate(zip(self.weights, self.biases)):
            check_shape(f"projector bias {index}", bias, (weight.shape[1],))
            if index and self.weights[index - 1].shape[1] != weight.shape[0]:
                raise ConfigurationError("Projector layer dimensions do not chain", {"layer": index})

    @property
    def in_dim(self) -> int:
        return int(self.weights[0].shape[0])

    @property
    def out_dim(self) -> int:
        return int(self.weights[-1].shape[1])

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def forward(self, x: np.ndarray) -> "tuple[np.ndarray, MlpCache]":
        check_shape("projector input", x, (None, self.in_dim))
        hidden = np.asarray(x, dtype=np.float64)
        inputs, pre = [], []
        for index, (weight, bias) in enumerate(zip(self.weights, self.biases)):
            inputs.append(hidden)
            act = hidden @ np.asarray(weight, dtype=np.float64) + np.asarray(bias, dtype=np.float64)
            pre.append(act)
            hidden = np.maximum(act, 0.0) if index < self.n_layers - 1 else act
        return hidden, MlpCache(inputs, pre)

    def backward(self, cache: MlpCache, grad_out: np.ndarray) -> "tuple[np.ndarray, List[np.ndarray], List[np.ndarray]]":
        """Returns the input gradient and per-layer weight and bias gradients."""
        grad = np.asarray(grad_out, dtype=np.float64)
        weight_grads: List[np.ndarray] = [None] * self.n_layers
        bias_grads: List[np.ndarray] = [None] * self.n_layers
        for index in reversed(range(self.n_layers)):
            if index < self.n_layers - 1:
                grad = grad * (cache.pre_activations[index] > 0)
            weight_grads[index] = cache.inputs[index].T @ grad
            bias_grads[index] = grad.sum(axis=0)
            grad = grad @ np.asarray(self.weights[index], dtype=np.float64).T
        return grad, weight_grads, bias_grads

    def parameters(self, prefix: str = "") -> Dict[str, np.ndarray]:
        params = {}
        for index, (weight, bias) in enumerate(zip(self.weights, self.biases)):
            params[f"{prefix}w{index}"] = weight
            params[f"{prefix}b{index}"] = bias
        return params

    def load_parameters(self, params: Dict[str, np.ndarray], prefix: str = "") -> None:
        for index in range(self.n_layers):
            self.weights[index] = params[f"{prefix}w{index}"]
            self.biases[index] = params[f"{prefix}b{index}"]


@dataclass
class ExpertBank:
    """K expert projectors plus a linear selection network over teacher features."""

    experts: List[MlpProjector]
    selection_weight: np.ndarray
    selection_bias: np.ndarray
    temperature_start: float = 1.0
    temperature_end: float = 0.1
    anneal_epochs: int = 1000

    def __post_init__(self) -> None:
        if not self.experts:
            raise ConfigurationError("Expert bank needs at least one expert (K >= 1)")
        first = self.experts[0]
        for expert in self.experts[1:]:
            if expert.in_dim != first.in_dim or expert.out_dim != first.out_dim:
                raise ConfigurationError("Experts must share input and output dimensions")
        check_shape("selection weight", self.selection_weight, (None, self.n_experts))
        check_shape("selection bias", self.selection_bias, (self.n_experts,))
        if not 0 < self.temperature_end <= self.temperature_start:
            raise ConfigurationError(
                "Gumbel temperatures must satisfy 0 < end <= start",
                {"start": self.temperature_start, "end": self.temperature_end},
            )

    @property
    def n_experts(self) -> int:
        return len(self.experts)

    @property
    def in_dim(self) -> int:
        return self.experts[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.experts[0].out_dim

    @property
    def teacher_dim(self) -> int:
        return int(self.selection_weight.shape[0])

    @property
    def decay_per_epoch(self) -> float:
        return (self.temperature_end / self.temperature_start) ** (1.0 / max(self.anneal_epochs, 1))

    def temperature(self, epoch: int) -> float:
        return gumbel_temperature(epoch, self.anneal_epochs, self.temperature_start, self.temperature_end)

    def parameters(self, prefix: str = "") -> Dict[str, np.ndarray]:
        params = {f"{prefix}select.w": self.selection_weight, f"{prefix}select.b": self.selection_bias}
        for index, expert in enumerate(self.experts):
            params.update(expert.parameters(prefix=f"{prefix}expert{index}."))
        return params

    def load_parameters(self, params: Dict[str, np.ndarray], prefix: str = "") -> None:
        self.selection_weight = params[f"{prefix}select.w"]
        self.selection_bias = params[f"{prefix}select.b"]
        for index, expert in enumerate(self.experts):
            expert.load_parameters(params, prefix=f"{prefix}expert{index}.")


class SelectionCache(NamedTuple):
    """Selection-network intermediates for one batch of teacher features."""

    teacher: np.ndarray
    logits: np.ndarray
    weights: np.ndarray
    temperature: float
    mode: Mode
    noise: Optional[np.ndarray]


class DeCache(NamedTuple):
    """Everything ``de_backward`` needs for one projected batch."""

    selection: SelectionCache
    expert_outputs: np.ndarray
    expert_caches: List[MlpCache]
