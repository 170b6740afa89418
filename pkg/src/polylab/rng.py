"""Counter-based random number generation.

Every environment variable is a pure function of (seed, step, site), so the
disorder field never has to be materialized: layers can be regenerated on
demand (backward pass, finite differences, layer resampling) and distinct
instances can run in parallel without shared state.

The mixer is the SplitMix64 finalizer applied sequentially to the 64-bit
words (seed, k+1, x_1, ..., x_d), each word pre-multiplied by the golden
ratio constant before being folded in.
"""

from __future__ import annotations

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)

_MUL1 = np.uint64(0xBF58476D1CE4E5B9)
_MUL2 = np.uint64(0x94D049BB133111EB)
_SH1 = np.uint64(30)
_SH2 = np.uint64(27)
_SH3 = np.uint64(31)

_U53 = 2.0 ** -53
_SHIFT11 = np.uint64(11)


def splitmix64(z):
    """SplitMix64 finalizer (xor-shift-multiply), vectorized over uint64."""
    z = np.asarray(z, dtype=np.uint64).copy()
    z ^= z >> _SH1
    z *= _MUL1
    z ^= z >> _SH2
    z *= _MUL2
    z ^= z >> _SH3
    return z


def _as_word(w):
    """Encode a Python int or int64 array as a two's-complement uint64."""
    a = np.asarray(w)
    if a.dtype == np.uint64:
        return a
    return a.astype(np.int64).view(np.uint64)


def mix_words(seed, *words):
    """Fold a sequence of 64-bit words into a single mixed uint64 state.

    Broadcasting applies across the words, so passing coordinate arrays
    yields one state per site.
    """
    state = np.asarray(np.uint64(seed & 0xFFFFFFFFFFFFFFFF))
    for w in words:
        state = splitmix64(state ^ (_as_word(w) * GOLDEN))
    return state


def derive_seed(seed, *words) -> int:
    """Deterministic sub-seed from a parent seed and integer tags."""
    return int(mix_words(seed, *words))


def counter_uniform(seed, k, coords):
    """Uniform [0,1) variates keyed by (seed, step k, site coordinates).

    coords: integer array of shape (..., d); one variate per leading entry.
    Identical keys always give identical output.
    """
    coords = np.asarray(coords, dtype=np.int64)
    state = mix_words(seed, k + 1)
    state = np.broadcast_to(state, coords.shape[:-1]).copy()
    for j in range(coords.shape[-1]):
        state = splitmix64(state ^ (_as_word(coords[..., j]) * GOLDEN))
    return (state >> _SHIFT11).astype(np.float64) * _U53


def replication_seed(base_seed: int, r: int) -> int:
    """Seed for replication r: finalizer of base_seed + r * golden."""
    base = np.asarray(base_seed & 0xFFFFFFFFFFFFFFFF, dtype=np.uint64)
    return int(splitmix64(base + np.asarray(r, dtype=np.uint64) * GOLDEN))
