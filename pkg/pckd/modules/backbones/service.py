"""Backbones module - Feature lookup, scoring and the embedding-gradient adjoint."""

import logging
from typing import Dict, Optional, Sequence, Union

import numpy as np

from pckd.core.numerics import check_shape, uniform_init
from pckd.core.rng import RngStream
from pckd.shared.exceptions import ConfigurationError, DomainError
from pckd.shared.schemas import BackboneKind, Role

from .models import Checkpoint, GcnModel, MfModel, build_normalized_adjacency

logger = logging.getLogger(__name__)

Model = Union[MfModel, GcnModel]


def init_model(
    kind: BackboneKind,
    n_users: int,
    n_items: int,
    dim: int,
    rng: RngStream,
    train_users: Optional[np.ndarray] = None,
    train_items: Optional[np.ndarray] = None,
    n_layers: int = 2,
    dtype: str = "float32",
) -> Model:
    """Fresh model with ``uniform(-0.5/sqrt(d), 0.5/sqrt(d))`` embeddings."""
    if dim < 1:
        raise ConfigurationError("Embedding dimension must be at least 1", {"dim": dim})
    bound = 0.5 / np.sqrt(dim)
    generator = rng.generator
    user_emb = uniform_init(generator, (n_users, dim), bound, dtype)
    item_emb = uniform_init(generator, (n_items, dim), bound, dtype)
    if kind == BackboneKind.MF:
        return MfModel(user_emb, item_emb)
    if train_users is None or train_items is None:
        raise ConfigurationError("LightGCN needs the training interactions to build its graph")
    if n_layers < 0:
        raise ConfigurationError("n_layers must be nonnegative", {"n_layers": n_layers})
    adjacency = build_normalized_adjacency(n_users, n_items, train_users, train_items)
    return GcnModel(user_emb, item_emb, adjacency=adjacency, layers=n_layers)


def check_matches_dataset(checkpoint: Checkpoint, n_users: int, n_items: int, source: Optional[str] = None) -> None:
    """Raise ``ConfigurationError`` unless the checkpoint was trained on this many users and items."""
    if (checkpoint.n_users, checkpoint.n_items) != (n_users, n_items):
        details = {"checkpoint": (checkpoint.n_users, checkpoint.n_items), "dataset": (n_users, n_items)}
        if source is not None:
            details["path"] = source
        raise ConfigurationError("Checkpoint does not match the dataset", details)


def model_from_checkpoint(
    checkpoint: Checkpoint,
    train_users: Optional[np.ndarray] = None,
    train_items: Optional[np.ndarray] = None,
) -> Model:
    """Rebuild a model; LightGCN graphs are rebuilt from the training interactions."""
    if checkpoint.kind == BackboneKind.MF:
        return MfModel(checkpoint.user_emb.copy(), checkpoint.item_emb.copy())
    if train_users is None or train_items is None:
        raise ConfigurationError("LightGCN checkpoint needs the training interactions to rebuild its graph")
    adjacency = build_normalized_adjacency(checkpoint.n_users, checkpoint.n_items, train_users, train_items)
    return GcnModel(
        checkpoint.user_emb.copy(),
        checkpoint.item_emb.copy(),
        adjacency=adjacency,
        layers=checkpoint.n_layers,
    )


def features(model: Model, role: Role, ids: Sequence[int]) -> np.ndarray:
    """Feature rows for the requested users or items."""
    index = np.asarray(ids, dtype=np.int64)
    users, items = model.propagate()
    table = users if Role(role) == Role.USER else items
    if index.size and (index.min() < 0 or index.max() >= table.shape[0]):
        raise DomainError(f"{Role(role).value} id out of range", {"count": table.shape[0]})
    return table[index]


def score(u_vec: np.ndarray, i_vec: np.ndarray) -> float:
    """Inner-product preference score."""
    u = np.asarray(u_vec, dtype=np.float64)
    i = np.asarray(i_vec, dtype=np.float64)
    if u.shape != i.shape:
        raise ConfigurationError("Score vectors differ in dimension", {"user": u.shape, "item": i.shape})
    return float(u @ i)


def score_all_items(model: Model, user: int) -> np.ndarray:
    """Scores of one user against every item; no masking."""
    users, items = model.propagate()
    if not 0 <= user < users.shape[0]:
        raise DomainError("user id out of range", {"user": user})
    return np.asarray(items, dtype=np.float64) @ np.asarray(users[user], dtype=np.float64)


def score_matrix(model: Model) -> np.ndarray:
    """Dense ``|U| x |I|`` score matrix, computed in float64."""
    users, items = model.propagate()
    return np.asarray(users, dtype=np.float64) @ np.asarray(items, dtype=np.float64).T


def backward_into_embeddings(
    model: Model,
    user_feature_grad: np.ndarray,
    item_feature_grad: np.ndarray,
) -> Dict[str, np.ndarray]:
    """Map gradients on the full feature tables to gradients on the base embeddings."""
    check_shape("user feature gradient", user_feature_grad, (model.n_users, model.dim))
    check_shape("item feature gradient", item_feature_grad, (model.n_items, model.dim))
    user_grad, item_grad = model.propagate_grads(user_feature_grad, item_feature_grad)
    return {"user_emb": np.asarray(user_grad, dtype=np.float64), "item_emb": np.asarray(item_grad, dtype=np.float64)}
