"""Heralded beam-splitter experiment: topology, trial engine and coincidence counts.

The source sends the 810 nm photon of each pair to the herald detector H and
the 1550 nm photon through a 50-50 splitter whose outputs are watched by
detectors A (transmitted port) and B (reflected port). A pulse is *heralded*
when H clicks; A and B clicks only count when they fall inside the
coincidence window around the herald click, after removing the known fiber
delay between the signal and herald arms.

Two routes produce the same records: ``simulate_pulse`` walks a single pulse
through the scalar ``source``/``models`` operations and ``run`` evaluates
whole chunks of pulses with numpy. Both read the counter-based streams of
``rng`` at identical (tag, pulse, slot) coordinates.
"""

from __future__ import annotations

import csv
import dataclasses
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import rng
from .models import (
    DEFAULT_BRANCH_CAP,
    BranchCapExceeded,
    ModelKind,
    decide,
    observed_branch,
)
from .rng import Tag, TrialRandomness
from .source import DetectorId, DetectorSpec, SourceSpec, detect, emit_pulse, sample_pairs
from .spacetime import (
    C_LIGHT,
    FiberPath,
    SeparationClass,
    SpacetimeEvent,
    arrival_time,
    classify_separation,
    propagation_delay,
)

TRIAL_COLUMNS = ("pulse_index", "n_pairs", "herald", "A", "B", "branch_weight", "hidden_path")
DEFAULT_CHUNK = 1 << 20


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Timing:
    """Nominal arrival times (pulse emitted at t=0) and window offsets."""

    herald: float
    arm_A: float
    arm_B: float

    @property
    def offset_A(self) -> float:
        return self.arm_A - self.herald

    @property
    def offset_B(self) -> float:
        return self.arm_B - self.herald


@dataclass(frozen=True)
class ExperimentConfig:
    source: SourceSpec = field(default_factory=SourceSpec)
    detector_H: DetectorSpec = field(default_factory=lambda: DetectorSpec(DetectorId.H))
    detector_A: DetectorSpec = field(default_factory=lambda: DetectorSpec(DetectorId.A))
    detector_B: DetectorSpec = field(default_factory=lambda: DetectorSpec(DetectorId.B))
    fiber_source_to_H: FiberPath = field(default_factory=lambda: FiberPath(2.0))
    fiber_source_to_BS: FiberPath = field(default_factory=lambda: FiberPath(2.0))
    # both include the 10 m delay line on whichever arm currently holds it
    fiber_BS_to_A: FiberPath = field(default_factory=lambda: FiberPath(15.0))
    fiber_BS_to_B: FiberPath = field(default_factory=lambda: FiberPath(15.0))
    delay_line_length: float = 10.0
    delay_line_arm: str = "A"
    detector_distance_AB: float = 10.0
    coincidence_window: float = 2.0e-9
    model: ModelKind = ModelKind.NONLOCAL_COLLAPSE
    n_pulses: int = 1_000_000
    master_seed: int = 20120408
    transmittance: float = 0.5
    branch_cap: int = DEFAULT_BRANCH_CAP
    two_jitter: bool = False
    c_light: float = C_LIGHT

    def __post_init__(self):
        object.__setattr__(self, "model", ModelKind(self.model))
        ids = (self.detector_H.id, self.detector_A.id, self.detector_B.id)
        if ids != (DetectorId.H, DetectorId.A, DetectorId.B):
            raise ConfigError(f"detectors must be H, A, B in that order, got {ids}")
        if not isinstance(self.n_pulses, int) or self.n_pulses < 1:
            raise ConfigError(f"n_pulses must be an integer >= 1, got {self.n_pulses}")
        if not (math.isfinite(self.coincidence_window) and self.coincidence_window > 0):
            raise ConfigError("coincidence_window must be > 0")
        if self.delay_line_arm not in ("A", "B"):
            raise ConfigError("delay_line_arm must be 'A' or 'B'")
        if not 0.0 <= self.transmittance <= 1.0:
            raise ConfigError("transmittance must lie in [0, 1]")
        if not (math.isfinite(self.detector_distance_AB) and self.detector_distance_AB >= 0):
            raise ConfigError("detector_distance_AB must be >= 0")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError("master_seed must be a 64-bit unsigned integer")
        if self.branch_cap < 2:
            raise ConfigError("branch_cap must be >= 2")
        self._check_windowing()

    def _check_windowing(self):
        t = self.timing
        w = self.coincidence_window
        j_h = self.detector_H.jitter
        for name, det in (("A", self.detector_A), ("B", self.detector_B)):
            # a true coincidence can be off by up to (j_H + j_X) / 2
            if (j_h + det.jitter) / 2 > w / 2:
                raise ConfigError(
                    f"coincidence window {w:g} s cannot contain the combined jitter of H and {name}")
        period = 1.0 / self.source.pulse_rate
        worst = max(abs(t.offset_A), abs(t.offset_B)) + w
        if worst >= period:
            raise ConfigError(
                f"arm delays plus window ({worst:g} s) exceed the pulse period ({period:g} s); "
                "clicks would be paired with the wrong pulse")

    @property
    def detectors(self) -> tuple[DetectorSpec, DetectorSpec, DetectorSpec]:
        return self.detector_H, self.detector_A, self.detector_B

    @property
    def timing(self) -> Timing:
        emit = SpacetimeEvent((0.0, 0.0, 0.0), 0.0)
        at_bs = SpacetimeEvent((0.0, 0.0, 0.0), arrival_time(emit, self.fiber_source_to_BS))
        return Timing(
            herald=arrival_time(emit, self.fiber_source_to_H),
            arm_A=arrival_time(at_bs, self.fiber_BS_to_A),
            arm_B=arrival_time(at_bs, self.fiber_BS_to_B),
        )

    @property
    def separation(self) -> SeparationClass:
        delay_diff = abs(propagation_delay(self.fiber_BS_to_A) - propagation_delay(self.fiber_BS_to_B))
        ja, jb = self.detector_A.jitter, self.detector_B.jitter
        jitter = ja + jb if self.two_jitter else max(ja, jb)
        return classify_separation(self.detector_distance_AB, delay_diff, jitter, self.c_light)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


def swap_delay_line(config: ExperimentConfig) -> ExperimentConfig:
    """Move the delay line from Alice's arm to Bob's; the detectors stay put.

    The reference spacelike form has equal BS->A and BS->B fibers with the
    delay line counted on A. Afterwards BS->B is longer than BS->A by twice
    the delay line length.
    """
    a, b = config.fiber_BS_to_A, config.fiber_BS_to_B
    if config.delay_line_arm != "A":
        raise ConfigError("delay line is already on Bob's arm (timelike form)")
    if not math.isclose(a.length, b.length, rel_tol=0, abs_tol=1e-12):
        raise ConfigError("not a reference spacelike form: BS->A and BS->B fibers differ")
    if a.length < config.delay_line_length:
        raise ConfigError("BS->A fiber is shorter than the delay line it supposedly contains")
    dl = config.delay_line_length
    return config.replace(
        fiber_BS_to_A=a.extended(-dl),
        fiber_BS_to_B=b.extended(dl),
        delay_line_arm="B",
    )


@dataclass(frozen=True)
class CoincidenceCounts:
    R_H: int = 0
    R_HA: int = 0
    R_HB: int = 0
    R_HAB: int = 0
    R_H00: int = 0
    n_pulses: int = 0
    # heralded pulses by pair number, for the energy audit and loophole bookkeeping
    n_heralded_single_pair: int = 0
    n_heralded_multi_pair: int = 0
    n_heralded_no_pair: int = 0
    n_single_pair_no_click: int = 0
    n_single_pair_double_click: int = 0

    def __post_init__(self):
        for f in dataclasses.fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"{f.name} must be >= 0")
        if self.R_HA + self.R_HB - self.R_HAB + self.R_H00 != self.R_H:
            raise ValueError("counts violate R_HA + R_HB - R_HAB + R_H00 = R_H")
        if self.R_HAB > min(self.R_HA, self.R_HB):
            raise ValueError("R_HAB exceeds a two-fold coincidence count")

    def __add__(self, other: "CoincidenceCounts") -> "CoincidenceCounts":
        return CoincidenceCounts(*(
            getattr(self, f.name) + getattr(other, f.name) for f in dataclasses.fields(self)))

    def to_dict(self) -> dict[str, int]:
        return {f.name: int(getattr(self, f.name)) for f in dataclasses.fields(self)}

    @classmethod
    def from_dict(cls, data: dict) -> "CoincidenceCounts":
        return cls(**{f.name: int(data[f.name]) for f in dataclasses.fields(cls)})


@dataclass(frozen=True)
class TrialRecord:
    pulse_index: int
    n_pairs: int
    herald_clicked: bool
    click_A: bool
    click_B: bool
    branch_weight: float = 1.0
    hidden_path: str = ""


@dataclass
class TrialLog:
    """Column store of heralded pulses, ordered by pulse index."""

    pulse_index: np.ndarray
    n_pairs: np.ndarray
    click_A: np.ndarray
    click_B: np.ndarray
    branch_weight: np.ndarray
    hidden_path: np.ndarray

    @classmethod
    def empty(cls) -> "TrialLog":
        return cls(np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0, bool),
                   np.zeros(0, bool), np.zeros(0, np.float64), np.zeros(0, object))

    @classmethod
    def concat(cls, logs: Iterable["TrialLog"]) -> "TrialLog":
        logs = list(logs)
        if not logs:
            return cls.empty()
        return cls(*(np.concatenate([getattr(lg, f.name) for lg in logs])
                     for f in dataclasses.fields(cls)))

    def __len__(self):
        return len(self.pulse_index)

    @property
    def herald(self) -> np.ndarray:
        return np.ones(len(self), dtype=bool)

    def records(self) -> list[TrialRecord]:
        return [
            TrialRecord(int(p), int(n), True, bool(a), bool(b), float(w), str(h))
            for p, n, a, b, w, h in zip(self.pulse_index, self.n_pairs, self.click_A,
                                        self.click_B, self.branch_weight, self.hidden_path)
        ]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(TRIAL_COLUMNS)
            for r in self.records():
                writer.writerow([r.pulse_index, r.n_pairs, 1, int(r.click_A), int(r.click_B),
                                 repr(r.branch_weight), r.hidden_path])


def read_trials_csv(path) -> TrialLog:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != TRIAL_COLUMNS:
            raise ValueError(f"unexpected trial log header {header}")
        rows = [r for r in reader if r]
    if not rows:
        return TrialLog.empty()
    cols = list(zip(*rows))
    return TrialLog(
        np.array(cols[0], dtype=np.int64),
        np.array(cols[1], dtype=np.int64),
        np.array(cols[3], dtype=np.int64).astype(bool),
        np.array(cols[4], dtype=np.int64).astype(bool),
        np.array(cols[5], dtype=np.float64),
        np.array(cols[6], dtype=object),
    )


def within_window(herald_time: float, click_time: float, window: float, known_offset: float) -> bool:
    return bool(abs(click_time - herald_time - known_offset) <= window / 2)


def _dark_window(center: float, width: float) -> tuple[float, float]:
    return center - width / 2, center + width / 2


# ---------------------------------------------------------------------------
# scalar reference path


def simulate_pulse(config: ExperimentConfig, pulse_index: int) -> TrialRecord:
    """One pulse through emit -> herald -> decide -> detect -> coincidence."""
    r = TrialRandomness(config.master_seed, pulse_index)
    t = config.timing
    w = config.coincidence_window
    emission = emit_pulse(config.source, r)
    n = emission.n_pairs

    herald = detect(config.detector_H, [t.herald] * n, r, dark_window=_dark_window(t.herald, w))
    if not herald.clicked:
        return TrialRecord(pulse_index, n, False, False, False)

    if config.model is ModelKind.MANY_WORLDS:
        decision = observed_branch(n, r, transmittance=config.transmittance,
                                   branch_cap=config.branch_cap)
    else:
        decision = decide(config.model, n, config.separation, r,
                          transmittance=config.transmittance, branch_cap=config.branch_cap)

    clicks = []
    for det, slots, arrival, offset in (
        (config.detector_A, decision.photons_A, t.arm_A, t.offset_A),
        (config.detector_B, decision.photons_B, t.arm_B, t.offset_B),
    ):
        res = detect(det, [arrival] * len(slots), r, photon_slots=slots,
                     dark_window=_dark_window(arrival, w))
        clicks.append(res.clicked and within_window(herald.click_time, res.click_time, w, offset))

    hidden = "".join(h.value for h in decision.hidden) if decision.hidden else ""
    return TrialRecord(pulse_index, n, True, clicks[0], clicks[1], decision.branch_weight, hidden)


# ---------------------------------------------------------------------------
# vectorized engine


def _detect_batch(det: DetectorSpec, seed: int, pulses: np.ndarray, reaches: np.ndarray,
                  arrival: float, window: float):
    """Vector twin of ``source.detect`` over pulses; ``reaches`` is (pulse, slot) bool."""
    eff_tag, dark_tag, jitter_tag = {
        DetectorId.H: (Tag.HERALD_EFF, Tag.HERALD_DARK, Tag.HERALD_JITTER),
        DetectorId.A: (Tag.A_EFF, Tag.A_DARK, Tag.A_JITTER),
        DetectorId.B: (Tag.B_EFF, Tag.B_DARK, Tag.B_JITTER),
    }[det.id]
    n_slots = reaches.shape[1]
    if det.efficiency >= 1.0:
        photon = reaches.any(axis=1)
    elif det.efficiency <= 0.0 or n_slots == 0:
        photon = np.zeros(len(pulses), dtype=bool)
    else:
        u = rng.uniform_matrix(seed, eff_tag, pulses, n_slots)
        photon = (reaches & (u < det.efficiency)).any(axis=1)

    earliest = np.where(photon, arrival, np.inf)
    if det.dark_count_prob > 0:
        dark = rng.uniforms(seed, dark_tag, pulses, 0) < det.dark_count_prob
        lo, hi = _dark_window(arrival, window)
        dark_t = lo + (hi - lo) * rng.uniforms(seed, dark_tag, pulses, 1)
        earliest = np.where(dark, np.minimum(earliest, dark_t), earliest)
        clicked = photon | dark
    else:
        clicked = photon
    smear = (rng.uniforms(seed, jitter_tag, pulses, 0) - 0.5) * det.jitter
    return clicked, earliest + smear


def _run_chunk(config: ExperimentConfig, start: int, stop: int, want_log: bool):
    seed = config.master_seed
    t = config.timing
    w = config.coincidence_window
    pulses = np.arange(start, stop, dtype=np.int64)
    n_all = sample_pairs(config.source, seed, pulses)

    det_h = config.detector_H
    active = n_all > 0
    if det_h.dark_count_prob > 0:
        active |= rng.uniforms(seed, Tag.HERALD_DARK, pulses, 0) < det_h.dark_count_prob
    pulses, n = pulses[active], n_all[active]
    n_max = int(n.max()) if len(n) else 0

    slot_ok = np.arange(n_max)[None, :] < n[:, None]
    h_click, h_time = _detect_batch(det_h, seed, pulses, slot_ok, t.herald, w)
    pulses, n, slot_ok, h_time = pulses[h_click], n[h_click], slot_ok[h_click], h_time[h_click]
    n_max = int(n.max()) if len(n) else 0
    slot_ok = slot_ok[:, :n_max]

    T = config.transmittance
    model = config.model
    if model is ModelKind.MANY_WORLDS and len(n) and 2.0**n_max > config.branch_cap:
        raise BranchCapExceeded(
            f"pulse with {n_max} photons needs 2**{n_max} branches, cap is {config.branch_cap}")

    route = rng.uniform_matrix(seed, Tag.ROUTE, pulses, n_max) < T
    to_A = slot_ok & route
    if model is ModelKind.LOCAL_COLLAPSE and not config.separation.is_timelike:
        to_B = slot_ok & (rng.uniform_matrix(seed, Tag.ROUTE_B, pulses, n_max) < 1.0 - T)
    else:
        to_B = slot_ok & ~route

    a_click, a_time = _detect_batch(config.detector_A, seed, pulses, to_A, t.arm_A, w)
    b_click, b_time = _detect_batch(config.detector_B, seed, pulses, to_B, t.arm_B, w)
    a = a_click & (np.abs(a_time - h_time - t.offset_A) <= w / 2)
    b = b_click & (np.abs(b_time - h_time - t.offset_B) <= w / 2)

    counts = CoincidenceCounts(
        R_H=len(pulses),
        R_HA=int(a.sum()),
        R_HB=int(b.sum()),
        R_HAB=int((a & b).sum()),
        R_H00=int((~a & ~b).sum()),
        n_pulses=stop - start,
        n_heralded_single_pair=int((n == 1).sum()),
        n_heralded_multi_pair=int((n >= 2).sum()),
        n_heralded_no_pair=int((n == 0).sum()),
        n_single_pair_no_click=int(((n == 1) & ~a & ~b).sum()),
        n_single_pair_double_click=int(((n == 1) & a & b).sum()),
    )
    if not want_log:
        return counts, None

    if model is ModelKind.MANY_WORLDS:
        n_t = to_A.sum(axis=1)
        weight = np.array([T**int(k) * (1.0 - T) ** int(m - k) for k, m in zip(n_t, n)],
                          dtype=np.float64)
    else:
        weight = np.ones(len(n))
    if model in (ModelKind.EMPTY_WAVE, ModelKind.MANY_WORLDS):
        letters = np.where(route, "T", "R")
        hidden = np.array(["".join(row[:k]) for row, k in zip(letters, n)], dtype=object)
    else:
        hidden = np.full(len(n), "", dtype=object)
    return counts, TrialLog(pulses.copy(), n.copy(), a, b, weight, hidden)


@dataclass
class RunResult:
    config: ExperimentConfig
    counts: CoincidenceCounts
    trials: TrialLog | None = None


def chunk_bounds(n_pulses: int, chunk_size: int) -> list[tuple[int, int]]:
    return [(s, min(s + chunk_size, n_pulses)) for s in range(0, n_pulses, chunk_size)]


def run(config: ExperimentConfig, *, log_trials: bool = False, workers: int = 1,
        chunk_size: int = DEFAULT_CHUNK) -> RunResult:
    """Simulate ``config.n_pulses`` pulses and accumulate coincidence counts.

    Pulses are cut into chunks that may run on a thread pool in any order;
    since every draw is keyed by pulse index the merged result does not
    depend on ``workers`` or ``chunk_size``.
    """
    if chunk_size < 1:
        raise ValueError("chunk_size must be >= 1")
    bounds = chunk_bounds(config.n_pulses, chunk_size)

    def job(b):
        return _run_chunk(config, b[0], b[1], log_trials)

    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, bounds))
    else:
        parts = [job(b) for b in bounds]

    counts = CoincidenceCounts()
    for c, _ in parts:
        counts = counts + c
    trials = TrialLog.concat(lg for _, lg in parts) if log_trials else None
    return RunResult(config, counts, trials)
