"""Counter-based random streams.

All randomness flows through Philox, a counter-based generator, so any
consumer can be handed a substream addressed by (seed, index) without
coordination: the key carries the experiment seed and the top counter word
carries the index.  Substreams never collide as long as a single stream
draws fewer than 2^192 blocks, and results are independent of how work is
scheduled across threads or chunks.
"""

from __future__ import annotations

import numpy as np

# Fixed chunk length for vectorized Monte Carlo loops.  Chunk i of an
# experiment uses substream(seed, i), so estimates do not depend on how many
# chunks run, or where.
CHUNK = 1 << 15

_MASK64 = (1 << 64) - 1


def master_stream(seed: int) -> np.random.Generator:
    """The root stream for an experiment seed."""
    return substream(seed, 0)


def substream(seed: int, index: int) -> np.random.Generator:
    """Independent stream addressed by (seed, index)."""
    if index < 0:
        raise ValueError(f"substream index must be nonnegative, got {index}")
    key = np.array([seed & _MASK64, (seed >> 64) & _MASK64], dtype=np.uint64)
    counter = np.array([0, 0, index & _MASK64, (index >> 64) & _MASK64],
                       dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def chunk_sizes(total: int, chunk: int = CHUNK) -> list[int]:
    """Split ``total`` draws into fixed-size chunks (last one ragged)."""
    if total < 0:
        raise ValueError(f"total must be nonnegative, got {total}")
    full, rest = divmod(total, chunk)
    return [chunk] * full + ([rest] if rest else [])
