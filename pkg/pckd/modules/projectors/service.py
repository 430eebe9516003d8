"""Projectors module - Projection, DE expert selection and their gradients."""

import logging
from typing import Dict, Optional, Tuple

import numpy as np

from pckd.core.numerics import check_shape, log_softmax, softmax
from pckd.core.rng import RngStream
from pckd.shared.exceptions import ConfigurationError
from pckd.shared.schemas import Mode

from .models import DeCache, ExpertBank, MlpProjector, SelectionCache

logger = logging.getLogger(__name__)


# ============== Construction ==============


def init_mlp(
    in_dim: int,
    out_dim: int,
    rng: RngStream,
    hidden_dim: Optional[int] = None,
    n_layers: int = 2,
    dtype: str = "float32",
) -> MlpProjector:
    """MLP with ``uniform(-1/sqrt(fan_in), 1/sqrt(fan_in))`` weights and biases."""
    if n_layers < 1:
        raise ConfigurationError("Projector needs at least one layer", {"n_layers": n_layers})
    hidden = hidden_dim or out_dim
    dims = [in_dim] + [hidden] * (n_layers - 1) + [out_dim]
    generator = rng.generator
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(generator.uniform(-bound, bound, size=(fan_in, fan_out)).astype(dtype))
        biases.append(generator.uniform(-bound, bound, size=fan_out).astype(dtype))
    return MlpProjector(weights, biases)


def identity_projector(dim: int, dtype: str = "float32") -> MlpProjector:
    return MlpProjector([np.eye(dim, dtype=dtype)], [np.zeros(dim, dtype=dtype)])


def init_bank(
    student_dim: int,
    teacher_dim: int,
    n_experts: int,
    rng: RngStream,
    hidden_dim: Optional[int] = None,
    n_layers: int = 2,
    temperature_start: float = 1.0,
    temperature_end: float = 0.1,
    anneal_epochs: int = 1000,
    dtype: str = "float32",
) -> ExpertBank:
    """K freshly initialised experts and a linear selection network."""
    if n_experts < 1:
        raise ConfigurationError("Expert bank needs K >= 1", {"K": n_experts})
    experts = [
        init_mlp(student_dim, teacher_dim, rng.child(index), hidden_dim, n_layers, dtype)
        for index in range(n_experts)
    ]
    bound = 1.0 / np.sqrt(teacher_dim)
    generator = rng.child(n_experts).generator
    return ExpertBank(
        experts=experts,
        selection_weight=generator.uniform(-bound, bound, size=(teacher_dim, n_experts)).astype(dtype),
        selection_bias=generator.uniform(-bound, bound, size=n_experts).astype(dtype),
        temperature_start=temperature_start,
        temperature_end=temperature_end,
        anneal_epochs=anneal_epochs,
    )


def wrap_single(projector: MlpProjector, teacher_dim: Optional[int] = None) -> ExpertBank:
    """An expert bank holding one projector; its selection weight is always 1."""
    dim = teacher_dim or projector.out_dim
    return ExpertBank(
        experts=[projector],
        selection_weight=np.zeros((dim, 1), dtype=projector.weights[0].dtype),
        selection_bias=np.zeros(1, dtype=projector.weights[0].dtype),
    )


# ============== Forward ==============


def project(projector: MlpProjector, x: np.ndarray) -> np.ndarray:
    """Map a batch of student features into teacher space."""
    out, _ = projector.forward(x)
    return out


def de_select(
    bank: ExpertBank,
    teacher_feature: np.ndarray,
    epoch: int,
    mode: Mode,
    rng: Optional[RngStream] = None,
    noise: Optional[np.ndarray] = None,
) -> SelectionCache:
    """
    Expert weights per row of ``teacher_feature``.

    Train mode returns Gumbel-softmax weights at the bank's current temperature (noise is
    drawn from ``rng`` unless given); eval mode returns the one-hot argmax of the logits.
    """
    check_shape("teacher feature", teacher_feature, (None, bank.teacher_dim))
    teacher = np.asarray(teacher_feature, dtype=np.float64)
    logits = teacher @ np.asarray(bank.selection_weight, dtype=np.float64) + np.asarray(
        bank.selection_bias, dtype=np.float64
    )
    temperature = bank.temperature(epoch)
    rows = teacher.shape[0]

    if bank.n_experts == 1:
        weights = np.ones((rows, 1))
        return SelectionCache(teacher, logits, weights, temperature, Mode(mode), None)

    if Mode(mode) == Mode.EVAL:
        weights = np.zeros_like(logits)
        weights[np.arange(rows), np.argmax(logits, axis=1)] = 1.0
        return SelectionCache(teacher, logits, weights, temperature, Mode.EVAL, None)

    if noise is None:
        if rng is None:
            raise ConfigurationError("Train-mode selection needs an rng stream or explicit noise")
        noise = rng.gumbel(logits.shape)
    check_shape("gumbel noise", noise, logits.shape)
    weights = softmax((log_softmax(logits, axis=1) + noise) / temperature, axis=1)
    return SelectionCache(teacher, logits, weights, temperature, Mode.TRAIN, np.asarray(noise, dtype=np.float64))


def de_project(
    bank: ExpertBank,
    student_feature: np.ndarray,
    teacher_feature: np.ndarray,
    epoch: int,
    mode: Mode,
    rng: Optional[RngStream] = None,
    noise: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, DeCache]:
    """Selection-weighted sum of expert projections."""
    check_shape("student feature", student_feature, (None, bank.in_dim))
    if np.shape(student_feature)[0] != np.shape(teacher_feature)[0]:
        raise ConfigurationError("Student and teacher feature batches differ in size")
    selection = de_select(bank, teacher_feature, epoch, mode, rng, noise)
    outputs, caches = [], []
    for expert in bank.experts:
        out, cache = expert.forward(student_feature)
        outputs.append(out)
        caches.append(cache)
    stacked = np.stack(outputs, axis=1)  # rows x K x d_t
    projected = np.einsum("bk,bkd->bd", selection.weights, stacked)
    return projected, DeCache(selection, stacked, caches)


# ============== Backward ==============


def _selection_backward(bank: ExpertBank, cache: SelectionCache, grad_weights: np.ndarray) -> Dict[str, np.ndarray]:
    if bank.n_experts == 1 or cache.mode == Mode.EVAL:
        return {
            "select.w": np.zeros(bank.selection_weight.shape),
            "select.b": np.zeros(bank.selection_bias.shape),
        }
    y = cache.weights
    grad_z = y * (grad_weights - np.sum(y * grad_weights, axis=1, keepdims=True)) / cache.temperature
    probs = softmax(cache.logits, axis=1)
    grad_logits = grad_z - probs * np.sum(grad_z, axis=1, keepdims=True)
    return {
        "select.w": cache.teacher.T @ grad_logits,
        "select.b": grad_logits.sum(axis=0),
    }


def de_backward(bank: ExpertBank, cache: DeCache, grad_out: np.ndarray) -> Tuple[np.ndarray, Dict[str, np.ndarray]]:
    """Gradients of a ``de_project`` output w.r.t. student features and bank parameters."""
    grad = np.asarray(grad_out, dtype=np.float64)
    weights = cache.selection.weights
    grad_weights = np.einsum("bkd,bd->bk", cache.expert_outputs, grad)
    param_grads = _selection_backward(bank, cache.selection, grad_weights)

    grad_student = np.zeros((grad.shape[0], bank.in_dim))
    for index, (expert, expert_cache) in enumerate(zip(bank.experts, cache.expert_caches)):
        grad_in, weight_grads, bias_grads = expert.backward(expert_cache, weights[:, index : index + 1] * grad)
        grad_student += grad_in
        for layer, (gw, gb) in enumerate(zip(weight_grads, bias_grads)):
            param_grads[f"expert{index}.w{layer}"] = gw
            param_grads[f"expert{index}.b{layer}"] = gb
    return grad_student, param_grads
