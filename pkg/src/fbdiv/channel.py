"""Block-fading channel draws and deterministic random substreams.

Every random quantity in a simulation comes from a substream identified by
``(master_seed, point_key, block, label)``:

* ``master_seed`` -- the user-facing seed.
* ``point_key`` -- a stable hash of the experiment point (scheme, M, P, T,
  B, K), so the same point gets the same draws whether it runs alone or
  inside a sweep.
* ``block`` -- index of a fixed-size block of consecutive trials. The block
  size is a module constant, so the mapping does not depend on how many
  workers execute the blocks.
* ``label`` -- which quantity is drawn (:class:`StreamLabel`). Per-user RVQ
  codebooks use ``StreamLabel.RVQ_CODEBOOK + user``.

The tuple is fed to :class:`numpy.random.SeedSequence` as entropy plus spawn
key, which hashes it into an independent PCG64 state.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass

import numpy as np

from .numerics import complex_gaussian

BLOCK_SIZE = 256


class StreamLabel(enum.IntEnum):
    CHANNEL = 0
    RBF_BASIS = 1
    PURC_BASIS = 2
    RVQ_ERROR = 3
    # per-user explicit codebooks occupy RVQ_CODEBOOK + user
    RVQ_CODEBOOK = 1 << 20


@dataclass(frozen=True)
class SeedPolicy:
    master_seed: int
    point_key: int = 0

    def stream(self, block: int, label: int) -> np.random.Generator:
        return substream(self.master_seed, self.point_key, block, label)


def substream(master_seed: int, point_key: int, block: int, label: int) -> np.random.Generator:
    """Independent generator for one ``(seed, point, block, label)`` tuple."""
    ss = np.random.SeedSequence(
        entropy=int(master_seed) & ((1 << 64) - 1),
        spawn_key=(int(point_key), int(block), int(label)),
    )
    return np.random.Generator(np.random.PCG64(ss))


def point_key(*fields) -> int:
    """Stable 63-bit key for an experiment point."""
    text = "|".join(str(f) for f in fields)
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "big") >> 1


@dataclass(frozen=True)
class ChannelRealization:
    """Channel vectors of K single-antenna users, one per row of ``H``."""

    H: np.ndarray
    frame_index: int = 0

    @property
    def K(self) -> int:
        return self.H.shape[0]

    @property
    def M(self) -> int:
        return self.H.shape[1]


def draw_channel(K: int, M: int, rng: np.random.Generator, frame_index: int = 0) -> ChannelRealization:
    if K < 1 or M < 1:
        raise ValueError(f"need K >= 1 and M >= 1, got K={K}, M={M}")
    return ChannelRealization(complex_gaussian(rng, (K, M)), frame_index)


def draw_channels(n: int, K: int, M: int, rng: np.random.Generator) -> np.ndarray:
    """Stack of ``n`` independent frames, shape ``(n, K, M)``."""
    return complex_gaussian(rng, (n, K, M))
