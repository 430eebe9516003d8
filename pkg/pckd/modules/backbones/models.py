"""Backbones module - Matrix factorization and light graph convolution models."""

from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from pckd.shared.schemas import BackboneKind


def build_normalized_adjacency(
    n_users: int,
    n_items: int,
    users: np.ndarray,
    items: np.ndarray,
) -> sp.csr_matrix:
    """
    Symmetric ``D^{-1/2} A D^{-1/2}`` over the bipartite user-item graph.

    Users occupy rows ``0..n_users-1`` and items the rows after them. Self-loops are not
    added; isolated nodes get a zero row.
    """
    pairs = np.unique(np.asarray(users, dtype=np.int64) * n_items + np.asarray(items, dtype=np.int64))
    rows = pairs // n_items
    cols = pairs % n_items + n_users
    size = n_users + n_items
    data = np.ones(rows.size * 2, dtype=np.float64)
    adjacency = sp.coo_matrix(
        (data, (np.concatenate([rows, cols]), np.concatenate([cols, rows]))),
        shape=(size, size),
    ).tocsr()
    degree = np.asarray(adjacency.sum(axis=1)).ravel()
    with np.errstate(divide="ignore"):
        inv_sqrt = np.where(degree > 0, 1.0 / np.sqrt(degree), 0.0)
    scale = sp.diags(inv_sqrt)
    return (scale @ adjacency @ scale).tocsr()


@dataclass
class MfModel:
    """BPRMF: the features are the embedding tables themselves."""

    user_emb: np.ndarray
    item_emb: np.ndarray

    kind = BackboneKind.MF

    @property
    def n_users(self) -> int:
        return int(self.user_emb.shape[0])

    @property
    def n_items(self) -> int:
        return int(self.item_emb.shape[0])

    @property
    def dim(self) -> int:
        return int(self.user_emb.shape[1])

    @property
    def n_layers(self) -> int:
        return 0

    def user_features(self) -> np.ndarray:
        return self.propagate()[0]

    def item_features(self) -> np.ndarray:
        return self.propagate()[1]

    def propagate(self) -> Tuple[np.ndarray, np.ndarray]:
        """Full user and item feature tables."""
        return self.user_emb, self.item_emb

    def propagate_grads(self, user_grad: np.ndarray, item_grad: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Adjoint of ``propagate``: feature gradients to embedding gradients."""
        return user_grad, item_grad

    def parameters(self) -> Dict[str, np.ndarray]:
        return {"user_emb": self.user_emb, "item_emb": self.item_emb}

    def load_parameters(self, params: Dict[str, np.ndarray]) -> None:
        self.user_emb = params["user_emb"]
        self.item_emb = params["item_emb"]


@dataclass
class GcnModel(MfModel):
    """LightGCN: features are the mean of layer 0..L propagated embeddings."""

    adjacency: Optional[sp.csr_matrix] = None
    layers: int = 2
    _adjacency_t: Optional[sp.csr_matrix] = field(default=None, init=False, repr=False)

    kind = BackboneKind.GCN

    def __post_init__(self) -> None:
        if self.adjacency is None:
            raise ValueError("GcnModel requires a normalized adjacency")
        self._adjacency_t = self.adjacency.T.tocsr()

    @property
    def n_layers(self) -> int:
        return self.layers

    def _mean_of_powers(self, matrix: sp.csr_matrix, stacked: np.ndarray) -> np.ndarray:
        total = np.array(stacked, dtype=np.float64)
        layer = total.copy()
        for _ in range(self.layers):
            layer = matrix @ layer
            total += layer
        return total / (self.layers + 1)

    def propagate(self) -> Tuple[np.ndarray, np.ndarray]:
        stacked = np.vstack([self.user_emb, self.item_emb])
        out = self._mean_of_powers(self.adjacency, stacked)
        return out[: self.n_users], out[self.n_users :]

    def propagate_grads(self, user_grad: np.ndarray, item_grad: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        stacked = np.vstack([user_grad, item_grad])
        out = self._mean_of_powers(self._adjacency_t, stacked)
        return out[: self.n_users], out[self.n_users :]


@dataclass(frozen=True)
class Checkpoint:
    """Decoded checkpoint file: backbone blocks plus optional tagged extra blocks."""

    kind: BackboneKind
    n_users: int
    n_items: int
    dim: int
    n_layers: int
    user_emb: np.ndarray
    item_emb: np.ndarray
    seed: int
    config_digest: bytes
    blocks: Dict[int, bytes] = field(default_factory=dict)
    dtype: str = "float32"
