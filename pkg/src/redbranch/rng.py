"""Counter-based, splittable random streams.

All samplers in this package take an explicit ``numpy.random.Generator``.
Streams are built on the Philox counter-based bit generator so that a
(seed, path) pair always yields the same stream, independent of how many
draws other streams have consumed.  There is no module-level RNG state.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _component(part: int | str) -> int:
    if isinstance(part, int):
        if part < 0:
            raise ValueError("stream path components must be nonnegative")
        return part
    digest = hashlib.blake2s(part.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def make_stream(seed: int, *path: int | str) -> np.random.Generator:
    """Return a deterministic Generator for (seed, *path).

    String path components are hashed with BLAKE2s, so row keys and
    experiment names shard reproducibly across platforms.
    """
    entropy = (int(seed),) + tuple(_component(p) for p in path)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def substreams(rng_seed: int, count: int, *path: int | str) -> list[np.random.Generator]:
    """Disjoint child streams for parallel replicates."""
    return [make_stream(rng_seed, *path, i) for i in range(count)]
