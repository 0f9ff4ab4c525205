"""Lab geometry, fiber propagation and the spacelike/timelike signaling test."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

# Rounded vacuum light speed; the reference thresholds (0.3 m, 30.3 m) use it.
C_LIGHT = 3.0e8
# Group velocity in single-mode glass fiber.
FIBER_SPEED = 2.0e8


@dataclass(frozen=True)
class SpacetimeEvent:
    position: tuple[float, float, float]
    time: float

    def __post_init__(self):
        pos = tuple(float(x) for x in self.position)
        if len(pos) != 3:
            raise ValueError("position must be a 3-vector")
        if not all(math.isfinite(x) for x in (*pos, self.time)):
            raise ValueError("event coordinates must be finite")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "time", float(self.time))

    def distance_to(self, other: "SpacetimeEvent") -> float:
        return float(np.linalg.norm(np.subtract(self.position, other.position)))


@dataclass(frozen=True)
class FiberPath:
    length: float
    signal_speed: float = FIBER_SPEED

    def __post_init__(self):
        if not (math.isfinite(self.length) and self.length >= 0):
            raise ValueError(f"fiber length must be finite and >= 0, got {self.length}")
        if not (0 < self.signal_speed <= C_LIGHT):
            raise ValueError(f"signal speed must lie in (0, c], got {self.signal_speed}")

    def extended(self, extra: float) -> "FiberPath":
        return FiberPath(self.length + extra, self.signal_speed)


class Separation(str, enum.Enum):
    SPACELIKE = "spacelike"
    TIMELIKE = "timelike"


@dataclass(frozen=True)
class SeparationClass:
    kind: Separation
    signaling_window: float
    signaling_threshold_distance: float
    detector_distance: float

    @property
    def is_timelike(self) -> bool:
        return self.kind is Separation.TIMELIKE


def propagation_delay(path: FiberPath) -> float:
    return path.length / path.signal_speed


def arrival_time(emission: SpacetimeEvent, path: FiberPath) -> float:
    return emission.time + propagation_delay(path)


def _check_nonneg(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value < 0:
        raise ValueError(f"{name} must be finite and >= 0, got {value}")
    return value


def classify_separation(
    detector_distance: float,
    fiber_delay_difference: float,
    jitter: float,
    c: float = C_LIGHT,
) -> SeparationClass:
    """Decide whether detectors a distance apart can exchange a light signal.

    The signaling window is the one-way fiber delay difference plus the
    detector jitter. Detectors are timelike separated when a light signal
    can cover ``detector_distance`` within that window (``d <= c * window``).
    """
    d = _check_nonneg("detector_distance", detector_distance)
    delay = _check_nonneg("fiber_delay_difference", fiber_delay_difference)
    jit = _check_nonneg("jitter", jitter)
    if not (math.isfinite(c) and c > 0):
        raise ValueError("c must be positive")
    window = delay + jit
    threshold = c * window
    kind = Separation.TIMELIKE if d <= threshold else Separation.SPACELIKE
    return SeparationClass(kind, window, threshold, d)
