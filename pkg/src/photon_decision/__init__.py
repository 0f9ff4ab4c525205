"""Monte Carlo of the heralded single-photon beam-splitter test of decision at detection."""

from .analysis import (
    ComparisonReport,
    EnergyAudit,
    OracleResult,
    ProbabilityEstimates,
    accidental_triples_oracle,
    compare_runs,
    energy_audit,
    energy_audit_from_counts,
    estimate,
    solve_mu_for_triples,
)
from .experiment import (
    CoincidenceCounts,
    ConfigError,
    ExperimentConfig,
    TrialLog,
    TrialRecord,
    run,
    simulate_pulse,
    swap_delay_line,
    within_window,
)
from .models import (
    BranchSet,
    CounterfactualUndefined,
    HiddenVariable,
    ModelKind,
    OutcomeDecision,
    counterfactual_decide,
    decide,
)
from .source import DetectorId, DetectorSpec, SourceSpec, detect, emit_pulse
from .spacetime import (
    FiberPath,
    Separation,
    SeparationClass,
    SpacetimeEvent,
    arrival_time,
    classify_separation,
    propagation_delay,
)

__version__ = "0.1.0"
