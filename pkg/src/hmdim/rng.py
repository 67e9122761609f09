"""Counter-based random streams keyed by (seed, domain, index).

Each stream is a Philox generator whose 128-bit key packs the user seed and
a (domain, index) pair, so the numbers a given trajectory sees depend only on
the seed and its index, never on chunking or on how many workers run.
"""

from __future__ import annotations

import numpy as np

# Trajectories are grouped in fixed blocks sharing one stream. The block
# size is part of the reproducibility contract: changing it changes results.
BLOCK = 256

WALK = 0
RESAMPLE = 1


def stream(seed: int, domain: int, index: int) -> np.random.Generator:
    if not 0 <= domain < 2**16 or not 0 <= index < 2**48:
        raise ValueError("domain or index out of range")
    key = np.array([seed, (domain << 48) | index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


class UniformBlocks:
    """Uniform variates ``U[t, j]`` for trajectories ``start .. start+width-1``.

    Column ``j`` belongs to trajectory ``start + j``; rows are time steps.
    Successive ``take(T)`` calls return consecutive time slabs, and the value
    for a given (trajectory, step) is the same however the slabs are cut.
    """

    def __init__(self, seed: int, start: int, width: int, domain: int = WALK):
        if start % BLOCK:
            raise ValueError("start must be aligned to BLOCK")
        self.width = width
        first = start // BLOCK
        last = (start + width - 1) // BLOCK
        self._gens = [stream(seed, domain, b) for b in range(first, last + 1)]

    def take(self, T: int) -> np.ndarray:
        parts = [g.random((T, BLOCK)) for g in self._gens]
        return np.hstack(parts)[:, : self.width]


def trajectory_uniforms(seed: int, index: int, n: int, domain: int = WALK) -> np.ndarray:
    """The ``n`` uniforms used by trajectory ``index`` (same as in the batch path)."""
    block, col = divmod(index, BLOCK)
    u = stream(seed, domain, block).random((n, BLOCK))
    return u[:, col]
