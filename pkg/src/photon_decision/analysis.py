"""Estimators, locality ratios, the energy audit and the accidental-triples oracle."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats

from .experiment import CoincidenceCounts, ExperimentConfig, TrialLog

PROB_FIELDS = ("P_A", "P_B", "P11", "P00", "P10", "P01")
ORACLE_REL_TAIL = 1e-12


class AnalysisError(ValueError):
    pass


def _binomial_se(p: float, n: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / n)


@dataclass(frozen=True)
class ProbabilityEstimates:
    P_A: float
    P_B: float
    P11: float
    P00: float
    P10: float
    P01: float
    locality_ratio: float | None
    std_err: dict[str, float]
    n_heralded: int
    separation: str = ""

    @property
    def locality_ratio_defined(self) -> bool:
        return self.locality_ratio is not None

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["locality_ratio_defined"] = self.locality_ratio_defined
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ProbabilityEstimates":
        try:
            probs = {k: float(data[k]) for k in PROB_FIELDS}
            ratio = data["locality_ratio"]
            se = {str(k): float(v) for k, v in dict(data["std_err"]).items()}
            missing = set(PROB_FIELDS) - set(se)
            if missing:
                raise AnalysisError(f"std_err lacks {sorted(missing)}")
            return cls(**probs, locality_ratio=None if ratio is None else float(ratio),
                       std_err=se, n_heralded=int(data["n_heralded"]),
                       separation=str(data.get("separation", "")))
        except (KeyError, TypeError, ValueError) as exc:
            raise AnalysisError(f"malformed estimates: {exc}") from exc


def _ratio_std_err(p11: float, p10: float, p01: float, n: int) -> float:
    # delta method under the multinomial covariance of (p11, p10, p01)
    pa, pb = p10 + p11, p01 + p11
    if pa * pb == 0:
        return float("nan")
    grad = np.array([
        1 / (pa * pb) - p11 / (pa**2 * pb) - p11 / (pa * pb**2),
        -p11 / (pa**2 * pb),
        -p11 / (pa * pb**2),
    ])
    p = np.array([p11, p10, p01])
    cov = (np.diag(p) - np.outer(p, p)) / n
    return float(math.sqrt(max(grad @ cov @ grad, 0.0)))


def estimate(counts: CoincidenceCounts, separation: str = "") -> ProbabilityEstimates:
    """Heralded estimators: every probability is a count over the herald count R_H."""
    n = counts.R_H
    if n <= 0:
        raise AnalysisError("no heralded trials (R_H = 0); probabilities undefined")
    p_a = counts.R_HA / n
    p_b = counts.R_HB / n
    p11 = counts.R_HAB / n
    p00 = counts.R_H00 / n
    p10 = (counts.R_HA - counts.R_HAB) / n
    p01 = (counts.R_HB - counts.R_HAB) / n
    ratio = p11 / (p_a * p_b) if p_a * p_b > 0 else None
    se = {k: _binomial_se(v, n) for k, v in
          zip(PROB_FIELDS, (p_a, p_b, p11, p00, p10, p01))}
    if ratio is not None:
        se["locality_ratio"] = _ratio_std_err(p11, p10, p01, n)
    return ProbabilityEstimates(p_a, p_b, p11, p00, p10, p01, ratio, se, n, separation)


@dataclass(frozen=True)
class OracleResult:
    value: float
    tail_bound: float
    p_herald: float
    n_max: int


def _both_hit_given_n(n: int, eta_ab: float, transmittance: float) -> float:
    """P(A and B both register | n signal photons), by enumerating (k_A, k_B, k_lost)."""
    p_a = transmittance * eta_ab
    p_b = (1.0 - transmittance) * eta_ab
    p_lost = 1.0 - eta_ab
    terms = []
    for k_a in range(1, n + 1):
        for k_b in range(1, n - k_a + 1):
            k_l = n - k_a - k_b
            ways = math.comb(n, k_a) * math.comb(n - k_a, k_b)
            terms.append(ways * p_a**k_a * p_b**k_b * p_lost**k_l)
    return math.fsum(terms)


def accidental_triples_oracle(mu: float, eta_H: float = 1.0, eta_AB: float = 1.0,
                              n_max: int = 40, transmittance: float = 0.5) -> OracleResult:
    """Triple-coincidence probability per herald caused purely by multi-pair pulses.

    Each signal photon is routed to exactly one detector, so a triple needs
    at least two pairs in the pulse. The Poisson sum is truncated at
    ``n_max``; ``tail_bound`` bounds the absolute truncation error of the
    conditional probability.
    """
    if not (math.isfinite(mu) and mu >= 0):
        raise AnalysisError("mu must be finite and >= 0")
    for name, eta in (("eta_H", eta_H), ("eta_AB", eta_AB), ("transmittance", transmittance)):
        if not 0.0 <= eta <= 1.0:
            raise AnalysisError(f"{name} must lie in [0, 1]")
    if n_max < 2:
        raise AnalysisError(f"n_max={n_max} cannot reach two-pair events; tail bound unbounded")

    ns = np.arange(n_max + 1)
    pmf = stats.poisson.pmf(ns, mu) if mu > 0 else (ns == 0).astype(float)
    p_herald_n = [1.0 - (1.0 - eta_H) ** int(k) for k in ns]
    numer = math.fsum(pmf[k] * p_herald_n[k] * _both_hit_given_n(int(k), eta_AB, transmittance)
                      for k in ns)
    denom = math.fsum(pmf[k] * p_herald_n[k] for k in ns)
    tail = float(stats.poisson.sf(n_max, mu)) if mu > 0 else 0.0
    if denom == 0:
        return OracleResult(0.0, 0.0, 0.0, n_max)
    value = numer / denom
    bound = tail / denom
    if bound > ORACLE_REL_TAIL * value:
        raise AnalysisError(
            f"n_max={n_max} leaves a truncation tail of {bound:.3g}, above "
            f"{ORACLE_REL_TAIL:g} of the result {value:.3g}; raise n_max")
    return OracleResult(value, bound, denom, n_max)


def solve_mu_for_triples(target: float, eta_H: float = 1.0, eta_AB: float = 1.0,
                         transmittance: float = 0.5) -> float:
    """Mean pair number at which the oracle's P(1,1 | herald) equals ``target``."""
    def f(mu):
        return accidental_triples_oracle(mu, eta_H, eta_AB, transmittance=transmittance).value - target
    return optimize.brentq(f, 1e-9, 5.0, xtol=1e-15, rtol=1e-13)


@dataclass(frozen=True)
class EnergyAudit:
    n_heralded: int
    n_zero_click: int
    n_double_click: int
    anomaly_fraction: float

    @property
    def zero_click_fraction(self) -> float:
        return self.n_zero_click / self.n_heralded

    @property
    def double_click_fraction(self) -> float:
        return self.n_double_click / self.n_heralded

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["zero_click_fraction"] = self.zero_click_fraction
        d["double_click_fraction"] = self.double_click_fraction
        return d


def _require_ideal(config: ExperimentConfig) -> None:
    bad = [d.id.value for d in config.detectors if not d.is_ideal]
    if bad:
        raise AnalysisError(f"energy audit requires ideal detectors; non-ideal: {bad}")


def energy_audit(trials: TrialLog, config: ExperimentConfig) -> EnergyAudit:
    """Count single photons that produced no click or two clicks.

    Only meaningful with ideal detectors; the log is filtered to heralded
    single-pair pulses before counting.
    """
    if trials is None:
        raise AnalysisError("energy audit needs a trial log")
    _require_ideal(config)
    single = trials.n_pairs == 1
    if not single.any():
        raise AnalysisError("no heralded single-pair trials to audit")
    a, b = trials.click_A[single], trials.click_B[single]
    n = int(single.sum())
    zero = int((~a & ~b).sum())
    double = int((a & b).sum())
    return EnergyAudit(n, zero, double, (zero + double) / n)


def energy_audit_from_counts(counts: CoincidenceCounts, config: ExperimentConfig) -> EnergyAudit:
    """Same audit from the single-pair tallies kept in the counts (no trial log needed)."""
    _require_ideal(config)
    n = counts.n_heralded_single_pair
    if n == 0:
        raise AnalysisError("no heralded single-pair trials to audit")
    zero, double = counts.n_single_pair_no_click, counts.n_single_pair_double_click
    return EnergyAudit(n, zero, double, (zero + double) / n)


@dataclass(frozen=True)
class ComparisonReport:
    z: dict[str, float]
    p11_ratio: float | None
    label_a: str = "a"
    label_b: str = "b"
    max_z: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "max_z", max(self.z.values()))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def compare_runs(a: ProbabilityEstimates, b: ProbabilityEstimates,
                 label_a: str = "a", label_b: str = "b") -> ComparisonReport:
    """Per-probability z-scores between two runs plus the P11 ratio a/b."""
    if a.n_heralded <= 0 or b.n_heralded <= 0:
        raise AnalysisError("both runs need heralded trials")
    z = {}
    for k in PROB_FIELDS:
        pa, pb = getattr(a, k), getattr(b, k)
        se = math.hypot(a.std_err[k], b.std_err[k])
        if se == 0:
            z[k] = 0.0 if pa == pb else math.inf
        else:
            z[k] = abs(pa - pb) / se
    ratio = a.P11 / b.P11 if b.P11 > 0 else None
    return ComparisonReport(z, ratio, label_a, label_b)


def format_table(rows: dict[str, ProbabilityEstimates]) -> str:
    """Text table, one row per configuration label."""
    head = f"{'config':<12}{'P_A':>18}{'P_B':>18}{'P11':>22}{'ratio':>20}{'R_H':>12}"
    lines = [head, "-" * len(head)]
    for label, e in rows.items():
        se = e.std_err
        ratio = "undefined" if e.locality_ratio is None else (
            f"{e.locality_ratio:.4f}±{se.get('locality_ratio', float('nan')):.4f}")
        lines.append(
            f"{label:<12}"
            f"{e.P_A:>10.5f}±{se['P_A']:.5f}"
            f"{e.P_B:>10.5f}±{se['P_B']:.5f}"
            f"{e.P11:>12.3e}±{se['P11']:.2e}"
            f"{ratio:>20}"
            f"{e.n_heralded:>12d}"
        )
    return "\n".join(lines)
