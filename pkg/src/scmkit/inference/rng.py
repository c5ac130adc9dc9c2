"""Counter-based SplitMix64 streams.

Draw ``j`` of stream ``s`` is the ``j``-th SplitMix64 output from a state keyed
on ``(seed, s)``, so any subset of draws can be produced independently and in
any order. Parallel and serial runs therefore agree bit for bit.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK = (1 << 64) - 1


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def splitmix64_reference(state: int, n: int) -> list[int]:
    """Plain-integer SplitMix64, used as the oracle for the vectorised version."""
    out = []
    for _ in range(n):
        state = (state + 0x9E3779B97F4A7C15) & _MASK
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        out.append(z ^ (z >> 31))
    return out


def check_seed(seed) -> int:
    seed = int(seed)
    if not 0 <= seed <= _MASK:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def stream_keys(seed: int, streams: np.ndarray) -> np.ndarray:
    """Initial SplitMix64 state of each stream."""
    streams = np.asarray(streams, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _mix(np.uint64(check_seed(seed)) ^ _mix((streams + np.uint64(1)) * GAMMA))


def raw_draws(seed: int, streams, n_draws: int) -> np.ndarray:
    """``(len(streams), n_draws)`` uint64 outputs."""
    keys = stream_keys(seed, streams)[:, None]
    j = np.arange(1, n_draws + 1, dtype=np.uint64)[None, :]
    with np.errstate(over="ignore"):
        return _mix(keys + j * GAMMA)


def uniforms(seed: int, streams, n_draws: int) -> np.ndarray:
    """Doubles in [0, 1) from the top 53 bits."""
    return (raw_draws(seed, streams, n_draws) >> np.uint64(11)).astype(np.float64) * 2.0 ** -53


def integers(seed: int, streams, n_draws: int, high: int) -> np.ndarray:
    """Indices in ``[0, high)`` as ``floor(u * high)``."""
    if high < 1:
        raise ValueError("high must be >= 1")
    return np.minimum((uniforms(seed, streams, n_draws) * high).astype(np.int64), high - 1)


def normals(seed: int, streams, n_draws: int) -> np.ndarray:
    """Standard normals via the inverse CDF (one uniform per draw)."""
    u = uniforms(seed, streams, n_draws)
    return ndtri((u + 2.0 ** -54))


def derive_seed(seed: int, *labels: int) -> int:
    """Child seed for a labelled sub-task (replication, bootstrap, ...)."""
    s = check_seed(seed)
    for lab in labels:
        s = int(stream_keys(s, np.array([lab], dtype=np.uint64))[0])
    return s
