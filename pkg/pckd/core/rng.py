"""Named, counter-based random streams.

Every consumer of randomness draws from an ``RngStream`` identified by the run seed,
a stream name (``init``, ``batching``, ``negatives``, ``pckd``, ``selection``,
``diagnostics``...) and an optional integer key such as ``(epoch, batch)``. Streams are
built on numpy's Philox bit generator seeded through ``SeedSequence`` spawn keys, so
toggling one feature never shifts another feature's draws and sequences are identical
across platforms.
"""

import zlib
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from pckd.shared.exceptions import DomainError


def _name_key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


@dataclass
class RngStream:
    """One named substream of a run seed."""

    seed: int
    name: str
    key: Tuple[int, ...] = ()
    _generator: Optional[np.random.Generator] = field(default=None, init=False, repr=False)

    @property
    def generator(self) -> np.random.Generator:
        if self._generator is None:
            sequence = np.random.SeedSequence(
                entropy=self.seed & 0xFFFFFFFFFFFFFFFF,
                spawn_key=(_name_key(self.name), *self.key),
            )
            self._generator = np.random.Generator(np.random.Philox(sequence))
        return self._generator

    def child(self, *key: int) -> "RngStream":
        """Independent substream keyed below this one (e.g. by epoch and batch)."""
        return RngStream(self.seed, self.name, self.key + tuple(int(k) for k in key))

    def draw_categorical(self, weights: np.ndarray) -> int:
        return rng_draw_categorical(self, weights)

    def gumbel(self, shape: Tuple[int, ...]) -> np.ndarray:
        return self.generator.gumbel(size=shape)


class StreamFactory:
    """Creates the named streams of one run."""

    def __init__(self, seed: int):
        self.seed = int(seed)

    def stream(self, name: str, *key: int) -> RngStream:
        return RngStream(self.seed, name, tuple(int(k) for k in key))


def rng_draw_categorical(stream: RngStream, weights: np.ndarray) -> int:
    """Draw index ``k`` with probability ``weights[k] / sum(weights)``."""
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.size == 0 or np.any(w < 0) or not np.all(np.isfinite(w)):
        raise DomainError("Categorical weights must be a finite nonnegative vector")
    total = w.sum()
    if total <= 0:
        raise DomainError("Categorical weights sum to zero")
    cumulative = np.cumsum(w)
    u = stream.generator.random() * cumulative[-1]
    index = int(np.searchsorted(cumulative, u, side="right"))
    return min(index, w.size - 1)
