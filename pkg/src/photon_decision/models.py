"""Where and how the outcome at the beam splitter gets decided.

Four pictures are implemented:

* ``NONLOCAL_COLLAPSE``: the photon is absorbed by exactly one detector,
  chosen at detection, whatever the separation of the detectors.
* ``LOCAL_COLLAPSE``: each detector decides on its own. Timelike separated
  detectors may coordinate and reproduce the nonlocal statistics; spacelike
  separated ones fire independently with probability 1/2 each.
* ``EMPTY_WAVE``: the particle picks a path at the beam splitter (the hidden
  variable); the wave on the other path never triggers anything.
* ``MANY_WORLDS``: every passage through the splitter branches; each branch
  holds one definite path assignment per photon.

Decisions here assume ideal detectors. Efficiency and dark counts are applied
afterwards to the photons each decision routes to each detector.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass

from .rng import Tag, TrialRandomness
from .spacetime import SeparationClass

DEFAULT_BRANCH_CAP = 2**16


class ModelKind(str, enum.Enum):
    NONLOCAL_COLLAPSE = "nonlocal_collapse"
    LOCAL_COLLAPSE = "local_collapse"
    EMPTY_WAVE = "empty_wave"
    MANY_WORLDS = "many_worlds"


class HiddenVariable(str, enum.Enum):
    TRANSMITTED = "T"
    REFLECTED = "R"


class ModelError(RuntimeError):
    pass


class BranchCapExceeded(ModelError):
    pass


class CounterfactualUndefined(ModelError):
    def __init__(self, model: ModelKind):
        super().__init__(f"counterfactual undefined for {model.value}: "
                         "no hidden path exists before detection")
        self.model = model


@dataclass(frozen=True)
class OutcomeDecision:
    """Ideal-detector outcome of one pulse.

    ``photons_A``/``photons_B`` list the photon slots delivered to each
    detector; a detector clicks (ideally) iff its tuple is non-empty.
    """

    photons_A: tuple[int, ...] = ()
    photons_B: tuple[int, ...] = ()
    branch_weight: float = 1.0
    hidden: tuple[HiddenVariable, ...] | None = None

    def __post_init__(self):
        if not 0.0 < self.branch_weight <= 1.0:
            raise ValueError(f"branch_weight must lie in (0, 1], got {self.branch_weight}")

    @property
    def click_A(self) -> bool:
        return bool(self.photons_A)

    @property
    def click_B(self) -> bool:
        return bool(self.photons_B)

    @property
    def outcome(self) -> tuple[int, int]:
        return int(self.click_A), int(self.click_B)


@dataclass(frozen=True)
class BranchSet:
    branches: tuple[OutcomeDecision, ...]

    def __post_init__(self):
        total = math.fsum(b.branch_weight for b in self.branches)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"branch weights sum to {total}, not 1")

    def __len__(self):
        return len(self.branches)

    def __iter__(self):
        return iter(self.branches)

    def outcome_weights(self) -> dict[tuple[int, int], float]:
        """Total weight on each (click_A, click_B) class."""
        out = {k: [] for k in ((1, 0), (0, 1), (1, 1), (0, 0))}
        for b in self.branches:
            out[b.outcome].append(b.branch_weight)
        return {k: math.fsum(v) for k, v in out.items()}


def hidden_path(u: float, transmittance: float) -> HiddenVariable:
    return HiddenVariable.TRANSMITTED if u < transmittance else HiddenVariable.REFLECTED


def _decision_from_paths(paths, weight=1.0, keep_hidden=False):
    a = tuple(k for k, p in enumerate(paths) if p is HiddenVariable.TRANSMITTED)
    b = tuple(k for k, p in enumerate(paths) if p is HiddenVariable.REFLECTED)
    return OutcomeDecision(a, b, weight, tuple(paths) if keep_hidden else None)


def branch_set(n_signal_photons: int, transmittance: float = 0.5,
               branch_cap: int = DEFAULT_BRANCH_CAP) -> BranchSet:
    n = n_signal_photons
    if 2**n > branch_cap:
        raise BranchCapExceeded(f"{n} photons need 2**{n} branches, cap is {branch_cap}")
    branches = []
    for paths in itertools.product(HiddenVariable, repeat=n):
        n_t = sum(p is HiddenVariable.TRANSMITTED for p in paths)
        w = transmittance**n_t * (1.0 - transmittance) ** (n - n_t)
        if w > 0:
            branches.append(_decision_from_paths(paths, w, keep_hidden=True))
    return BranchSet(tuple(branches))


def decide(
    model: ModelKind,
    n_signal_photons: int,
    separation: SeparationClass,
    randomness: TrialRandomness,
    *,
    transmittance: float = 0.5,
    branch_cap: int = DEFAULT_BRANCH_CAP,
) -> OutcomeDecision | BranchSet:
    """Route the signal photons of one pulse to detectors A and B.

    Photon ``k`` reads slot ``k`` of the ROUTE substream (and of ROUTE_B for
    the second detector's independent local decision). ``MANY_WORLDS``
    returns every branch rather than a single outcome.
    """
    model = ModelKind(model)
    n = int(n_signal_photons)
    if n < 0:
        raise ValueError("n_signal_photons must be >= 0")
    if model is ModelKind.MANY_WORLDS:
        return branch_set(n, transmittance, branch_cap)

    route = randomness[Tag.ROUTE]
    if model is ModelKind.LOCAL_COLLAPSE and not separation.is_timelike:
        route_b = randomness[Tag.ROUTE_B]
        a = tuple(k for k in range(n) if route.at(k) < transmittance)
        b = tuple(k for k in range(n) if route_b.at(k) < 1.0 - transmittance)
        return OutcomeDecision(a, b)

    paths = [hidden_path(route.at(k), transmittance) for k in range(n)]
    return _decision_from_paths(paths, keep_hidden=model is ModelKind.EMPTY_WAVE)


def observed_branch(n_signal_photons: int, randomness: TrialRandomness, *,
                    transmittance: float = 0.5,
                    branch_cap: int = DEFAULT_BRANCH_CAP) -> OutcomeDecision:
    """The branch a given observer ends up in, drawn with its branch weight."""
    n = n_signal_photons
    if 2**n > branch_cap:
        raise BranchCapExceeded(f"{n} photons need 2**{n} branches, cap is {branch_cap}")
    route = randomness[Tag.ROUTE]
    paths = [hidden_path(route.at(k), transmittance) for k in range(n)]
    n_t = sum(p is HiddenVariable.TRANSMITTED for p in paths)
    w = transmittance**n_t * (1.0 - transmittance) ** (n - n_t)
    return _decision_from_paths(paths, w, keep_hidden=True)


def counterfactual_decide(model: ModelKind, hidden: HiddenVariable,
                          detector_distance_from_BS: float) -> OutcomeDecision:
    """Outcome had the detectors been placed at another distance from the splitter.

    Only the empty-wave picture carries a path before detection, so only it
    answers; the answer never depends on the distance.
    """
    model = ModelKind(model)
    if not (math.isfinite(detector_distance_from_BS) and detector_distance_from_BS >= 0):
        raise ValueError("detector distance must be finite and >= 0")
    if model is not ModelKind.EMPTY_WAVE:
        raise CounterfactualUndefined(model)
    return _decision_from_paths([HiddenVariable(hidden)], keep_hidden=True)


def analytic_joint(model: ModelKind, separation: SeparationClass,
                   transmittance: float = 0.5) -> dict[tuple[int, int], float]:
    """Single-photon joint distribution of (click_A, click_B), ideal detectors."""
    t = transmittance
    model = ModelKind(model)
    if model is ModelKind.LOCAL_COLLAPSE and not separation.is_timelike:
        return {(1, 1): t * (1 - t), (0, 0): (1 - t) * t,
                (1, 0): t * t, (0, 1): (1 - t) * (1 - t)}
    return {(1, 1): 0.0, (0, 0): 0.0, (1, 0): t, (0, 1): 1 - t}
