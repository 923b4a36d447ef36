"""Counter-based random streams.

All randomness in the library flows through :func:`stream`, which derives an
independent Philox generator from a user seed and a path of labels. Work that
is split into chunks draws each chunk from its own ``(seed, *path, chunk)``
stream, so results do not depend on chunk scheduling or thread count. There
is no global RNG state anywhere.
"""

from __future__ import annotations

import hashlib
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np

THREADS_ENV_VAR = "QFCERT_THREADS"

#: rows per Monte Carlo chunk; fixed so that chunk boundaries (and therefore
#: every drawn sample) are independent of the thread count.
CHUNK_ROWS = 1 << 16


def _key128(seed: int, path: Sequence) -> list[int]:
    h = hashlib.blake2b(digest_size=16)
    h.update(str(int(seed)).encode())
    for part in path:
        h.update(b"/")
        h.update(str(part).encode())
    digest = h.digest()
    return [int.from_bytes(digest[:8], "little"), int.from_bytes(digest[8:], "little")]


def stream(seed: int, *path) -> np.random.Generator:
    """Philox generator keyed by ``(seed, *path)``; same inputs, same stream."""
    return np.random.Generator(np.random.Philox(key=_key128(seed, path)))


def derive_seed(seed: int, *path) -> int:
    """A plain integer sub-seed, for APIs that take seeds rather than streams."""
    return _key128(seed, path)[0]


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV_VAR, "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def chunk_bounds(total: int, chunk: int = CHUNK_ROWS) -> list[tuple[int, int]]:
    return [(lo, min(lo + chunk, total)) for lo in range(0, total, chunk)]


def map_chunks(
    fn: Callable[[int, int, int], object],
    total: int,
    threads: int | None = None,
    chunk: int = CHUNK_ROWS,
) -> list:
    """Run ``fn(chunk_index, lo, hi)`` over fixed-size chunks.

    Results come back ordered by chunk index whatever the thread count, so any
    order-sensitive reduction done by the caller is deterministic.
    """
    bounds = chunk_bounds(total, chunk)
    threads = default_threads() if threads is None else max(1, threads)
    if threads == 1 or len(bounds) <= 1:
        return [fn(i, lo, hi) for i, (lo, hi) in enumerate(bounds)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(fn, i, lo, hi) for i, (lo, hi) in enumerate(bounds)]
        return [f.result() for f in futures]
