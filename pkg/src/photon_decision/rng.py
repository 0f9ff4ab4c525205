"""Counter-based random numbers keyed by (seed, consumer tag, pulse, slot).

Every uniform used by the simulator is a pure function of four integers::

    key   = mix(seed + tag * GOLDEN)
    state = mix(key + (pulse + 1) * GOLDEN)
    word  = mix(state + (slot + 1) * GOLDEN)
    u     = (word >> 11) * 2**-53

where ``mix`` is the SplitMix64 finalizer and all arithmetic is modulo 2**64.
Because no draw depends on any other, a batch of pulses can be split into
chunks and evaluated in any order, on any number of threads, and still produce
the same numbers bit for bit.
"""

from __future__ import annotations

import enum

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_INV_2_53 = 2.0**-53


class Tag(enum.IntEnum):
    """Consumer tags; each one owns a private substream."""

    PAIRS = 1
    HERALD_EFF = 2
    HERALD_DARK = 3
    HERALD_JITTER = 4
    ROUTE = 5
    ROUTE_B = 6
    A_EFF = 7
    A_DARK = 8
    A_JITTER = 9
    B_EFF = 10
    B_DARK = 11
    B_JITTER = 12


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


_U30, _U27, _U31, _U11 = (np.uint64(s) for s in (30, 27, 31, 11))
_NM1, _NM2, _NG = np.uint64(_M1), np.uint64(_M2), np.uint64(GOLDEN)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    # uint64 array arithmetic wraps modulo 2**64 without warnings
    z = z ^ (z >> _U30)
    z *= _NM1
    z ^= z >> _U27
    z *= _NM2
    z ^= z >> _U31
    return z


def stream_key(seed: int, tag: int) -> int:
    return mix64((seed & MASK64) + int(tag) * GOLDEN)


def uniform(seed: int, tag: int, pulse: int, slot: int = 0) -> float:
    state = mix64(stream_key(seed, tag) + (pulse + 1) * GOLDEN)
    word = mix64(state + (slot + 1) * GOLDEN)
    return (word >> 11) * _INV_2_53


def _pulse_states(seed: int, tag: int, pulses: np.ndarray) -> np.ndarray:
    key = np.uint64(stream_key(seed, tag))
    p = np.asarray(pulses, dtype=np.uint64) + np.uint64(1)
    return _mix64_array(key + p * _NG)


def _to_unit(words: np.ndarray) -> np.ndarray:
    return (words >> _U11).astype(np.float64) * _INV_2_53


def uniforms(seed: int, tag: int, pulses: np.ndarray, slot: int | np.ndarray = 0) -> np.ndarray:
    """Vectorized ``uniform`` over pulse indices (and optionally per-element slots)."""
    states = _pulse_states(seed, tag, pulses)
    # 1-d so the slot offset wraps like the arrays do (numpy warns on scalar overflow)
    s = np.atleast_1d(np.asarray(slot, dtype=np.uint64)) + np.uint64(1)
    return _to_unit(_mix64_array(states + s * _NG))


def uniform_matrix(seed: int, tag: int, pulses: np.ndarray, n_slots: int) -> np.ndarray:
    """Uniforms for slots ``0..n_slots-1`` of each pulse, shape (len(pulses), n_slots)."""
    states = _pulse_states(seed, tag, pulses)[:, None]
    s = np.arange(1, n_slots + 1, dtype=np.uint64)[None, :]
    return _to_unit(_mix64_array(states + s * _NG))


class TrialStream:
    """Scalar view of one (seed, tag, pulse) substream; hands out successive slots."""

    def __init__(self, seed: int, tag: int, pulse: int):
        self.seed = seed
        self.tag = int(tag)
        self.pulse = pulse
        self._state = mix64(stream_key(seed, tag) + (pulse + 1) * GOLDEN)
        self._slot = 0

    def at(self, slot: int) -> float:
        return (mix64(self._state + (slot + 1) * GOLDEN) >> 11) * _INV_2_53

    def next(self) -> float:
        u = self.at(self._slot)
        self._slot += 1
        return u


class TrialRandomness:
    """All substreams of a single pulse, looked up by tag."""

    def __init__(self, seed: int, pulse: int):
        self.seed = seed
        self.pulse = pulse
        self._streams: dict[int, TrialStream] = {}

    def __getitem__(self, tag: Tag) -> TrialStream:
        if tag not in self._streams:
            self._streams[tag] = TrialStream(self.seed, tag, self.pulse)
        return self._streams[tag]
