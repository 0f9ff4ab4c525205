"""Photon-pair source and threshold single-photon detectors."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import stats

from . import rng
from .rng import Tag, TrialRandomness

HERALD_WAVELENGTH_NM = 810
SIGNAL_WAVELENGTH_NM = 1550


class DetectorId(str, enum.Enum):
    H = "H"
    A = "A"
    B = "B"


# (efficiency, dark count, jitter) substreams per detector
DETECTOR_TAGS = {
    DetectorId.H: (Tag.HERALD_EFF, Tag.HERALD_DARK, Tag.HERALD_JITTER),
    DetectorId.A: (Tag.A_EFF, Tag.A_DARK, Tag.A_JITTER),
    DetectorId.B: (Tag.B_EFF, Tag.B_DARK, Tag.B_JITTER),
}


@dataclass(frozen=True)
class SourceSpec:
    """Pulsed pair source.

    ``single_pair`` replaces the Poisson pair number by exactly one pair per
    pulse, the ideal-source limit used for the analytic predictions.
    """

    mean_pairs_per_pulse: float = 0.01
    pulse_rate: float = 1.0e6
    single_pair: bool = False

    def __post_init__(self):
        mu = self.mean_pairs_per_pulse
        if not (math.isfinite(mu) and mu >= 0):
            raise ValueError(f"mean_pairs_per_pulse must be finite and >= 0, got {mu}")
        if not (math.isfinite(self.pulse_rate) and self.pulse_rate > 0):
            raise ValueError("pulse_rate must be positive")


@dataclass(frozen=True)
class DetectorSpec:
    id: DetectorId
    efficiency: float = 1.0
    dark_count_prob: float = 0.0
    jitter: float = 1.0e-9

    def __post_init__(self):
        object.__setattr__(self, "id", DetectorId(self.id))
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError(f"efficiency must lie in [0, 1], got {self.efficiency}")
        if not 0.0 <= self.dark_count_prob < 1.0:
            raise ValueError(f"dark_count_prob must lie in [0, 1), got {self.dark_count_prob}")
        if not (math.isfinite(self.jitter) and self.jitter >= 0):
            raise ValueError("jitter must be finite and >= 0")

    @property
    def is_ideal(self) -> bool:
        return self.efficiency == 1.0 and self.dark_count_prob == 0.0


@dataclass(frozen=True)
class PulseEmission:
    pulse_index: int
    n_pairs: int

    def __post_init__(self):
        if self.n_pairs < 0:
            raise ValueError("n_pairs must be >= 0")

    @property
    def photon_slots(self) -> range:
        # photon k of the pulse draws slot k of every per-photon substream
        return range(self.n_pairs)


@dataclass(frozen=True)
class ClickResult:
    clicked: bool
    click_time: float | None = None


@lru_cache(maxsize=64)
def poisson_cdf_table(mu: float) -> np.ndarray:
    """Cumulative Poisson table, long enough that the remaining tail is below 2**-53."""
    if mu == 0:
        return np.array([1.0])
    k_max = int(mu) + 2
    while stats.poisson.sf(k_max, mu) > 2.0**-60:
        k_max += 1
    table = stats.poisson.cdf(np.arange(k_max + 1), mu)
    table.flags.writeable = False
    return table


def pairs_from_uniform(spec: SourceSpec, u: np.ndarray | float) -> np.ndarray:
    """Inverse-CDF map from uniforms to pair numbers."""
    if spec.single_pair:
        return np.ones(np.shape(u), dtype=np.int64)
    table = poisson_cdf_table(float(spec.mean_pairs_per_pulse))
    return np.searchsorted(table, u, side="right").astype(np.int64)


def emit_pulse(spec: SourceSpec, randomness: TrialRandomness) -> PulseEmission:
    u = randomness[Tag.PAIRS].at(0)
    return PulseEmission(randomness.pulse, int(pairs_from_uniform(spec, u)))


def sample_pairs(spec: SourceSpec, seed: int, pulses: np.ndarray) -> np.ndarray:
    """Pair numbers for a batch of pulse indices (same draws as ``emit_pulse``)."""
    if spec.single_pair:
        return np.ones(len(pulses), dtype=np.int64)
    return pairs_from_uniform(spec, rng.uniforms(seed, Tag.PAIRS, pulses))


def detect(
    spec: DetectorSpec,
    photon_arrivals: Sequence[float],
    randomness: TrialRandomness,
    *,
    photon_slots: Sequence[int] | None = None,
    dark_window: tuple[float, float] | None = None,
) -> ClickResult:
    """Threshold detection of the photons reaching one detector in a pulse.

    Each photon registers when its uniform falls below ``efficiency``, so
    raising the efficiency on a fixed stream can only add registrations. A
    dark count, if it fires, lands uniformly inside ``dark_window``. The click
    time is the earliest registration plus a uniform jitter of total width
    ``spec.jitter``.
    """
    eff_tag, dark_tag, jitter_tag = DETECTOR_TAGS[spec.id]
    if photon_slots is None:
        photon_slots = range(len(photon_arrivals))
    if len(photon_slots) != len(photon_arrivals):
        raise ValueError("photon_slots and photon_arrivals differ in length")
    times = [
        t for t, k in zip(photon_arrivals, photon_slots)
        if randomness[eff_tag].at(k) < spec.efficiency
    ]
    if spec.dark_count_prob > 0 and randomness[dark_tag].at(0) < spec.dark_count_prob:
        if dark_window is None:
            raise ValueError("dark counts enabled but no dark_window given")
        lo, hi = dark_window
        times.append(lo + (hi - lo) * randomness[dark_tag].at(1))
    if not times:
        return ClickResult(False, None)
    smear = (randomness[jitter_tag].at(0) - 0.5) * spec.jitter
    return ClickResult(True, min(times) + smear)
