"""Named random substreams built from a 64-bit mixing hash.

Every random draw in a simulation is a pure function of a tuple of integer
names (master seed, graph index, trial index, agent index, iteration, purpose
tag).  This makes results independent of evaluation order and of how trials
are distributed over workers: the same names always produce the same bits.

The mixer is a chained splitmix64 finalizer; draws map the top 53 bits of the
hash onto [0, 1).
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MULT_A = 0xBF58476D1CE4E5B9
_MULT_B = 0x94D049BB133111EB

# Purpose tags keep independent stream families from colliding.
TAG_RESPONSE = 1
TAG_XSTAR = 2
TAG_GRAPH = 3
TAG_TRIAL = 4
TAG_STATE = 5


def _scramble(z: int) -> int:
    z &= _MASK
    z ^= z >> 30
    z = (z * _MULT_A) & _MASK
    z ^= z >> 27
    z = (z * _MULT_B) & _MASK
    z ^= z >> 31
    return z


def mix64(*parts: int) -> int:
    """Hash a tuple of integers into a single uint64."""
    h = 0
    for p in parts:
        h = _scramble((h ^ (int(p) & _MASK)) + _GOLDEN)
    return h


def unit_from_key(*parts: int) -> float:
    """Uniform double in [0, 1) named by the key tuple."""
    return (mix64(*parts) >> 11) * 2.0**-53


def response_uniforms(trial_seed: int, iteration: int, num_agents: int,
                      offset: int = 0) -> np.ndarray:
    """One uniform per agent for a given iteration, vectorized over agents.

    Bit-identical to ``unit_from_key(trial_seed, TAG_RESPONSE, iteration, i)``
    for each agent index i in [offset, offset + num_agents).
    """
    base = mix64(trial_seed, TAG_RESPONSE, iteration)
    agents = np.arange(offset, offset + num_agents, dtype=np.uint64)
    h = (np.uint64(base) ^ agents) + np.uint64(_GOLDEN)
    h ^= h >> np.uint64(30)
    h *= np.uint64(_MULT_A)
    h ^= h >> np.uint64(27)
    h *= np.uint64(_MULT_B)
    h ^= h >> np.uint64(31)
    return (h >> np.uint64(11)).astype(np.float64) * 2.0**-53


def response_block(trial_seed: int, iterations: int, num_agents: int,
                   offset: int = 0) -> np.ndarray:
    """Uniforms for all (iteration, agent) pairs of a trial, shape (T, M).

    Row t-1 is bit-identical to ``response_uniforms(trial_seed, t, ...)``.
    """
    h0 = np.uint64(mix64(trial_seed, TAG_RESPONSE))
    golden = np.uint64(_GOLDEN)

    def scramble(z):
        z ^= z >> np.uint64(30)
        z *= np.uint64(_MULT_A)
        z ^= z >> np.uint64(27)
        z *= np.uint64(_MULT_B)
        z ^= z >> np.uint64(31)
        return z

    t_keys = scramble((h0 ^ np.arange(1, iterations + 1, dtype=np.uint64)) + golden)
    agents = np.arange(offset, offset + num_agents, dtype=np.uint64)
    h = scramble((t_keys[:, None] ^ agents[None, :]) + golden)
    return (h >> np.uint64(11)).astype(np.float64) * 2.0**-53


class KeyedStream:
    """Sequential uniform stream whose draws are named (key..., counter).

    Provides the same ``random()`` surface as a numpy Generator so it can be
    passed anywhere a response stream is expected.
    """

    def __init__(self, *key: int):
        self._key = tuple(int(k) for k in key)
        self._count = 0

    def random(self) -> float:
        u = unit_from_key(*self._key, self._count)
        self._count += 1
        return u
