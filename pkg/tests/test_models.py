import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from photon_decision.experiment import run
from photon_decision.models import (
    BranchCapExceeded,
    BranchSet,
    CounterfactualUndefined,
    HiddenVariable,
    ModelKind,
    OutcomeDecision,
    analytic_joint,
    branch_set,
    counterfactual_decide,
    decide,
)
from photon_decision.rng import TrialRandomness
from photon_decision.spacetime import classify_separation

from conftest import single_pair

SL = classify_separation(10.0, 0.0, 1e-9)
TL = classify_separation(10.0, 100e-9, 1e-9)
ALL = list(ModelKind)


def joint_from_counts(c):
    return {(1, 1): c.R_HAB, (0, 0): c.R_H00,
            (1, 0): c.R_HA - c.R_HAB, (0, 1): c.R_HB - c.R_HAB}


def test_model_names():
    assert {m.value for m in ModelKind} == {
        "nonlocal_collapse", "local_collapse", "empty_wave", "many_worlds"}


def test_local_collapse_spacelike_joint(spacelike):
    c = run(single_pair(spacelike, model="local_collapse", n_pulses=1_000_000)).counts
    for k, v in joint_from_counts(c).items():
        assert v / c.R_H == pytest.approx(0.25, abs=0.002), k


@pytest.mark.parametrize("form", ["spacelike", "timelike"])
def test_nonlocal_joint(form, request):
    cfg = request.getfixturevalue(form)
    c = run(single_pair(cfg, model="nonlocal_collapse", n_pulses=1_000_000)).counts
    j = joint_from_counts(c)
    assert j[(1, 1)] == 0 and j[(0, 0)] == 0
    assert j[(1, 0)] / c.R_H == pytest.approx(0.5, abs=0.002)
    assert j[(0, 1)] / c.R_H == pytest.approx(0.5, abs=0.002)


def test_empty_wave_deterministic_given_path():
    for pulse in range(200):
        d = decide(ModelKind.EMPTY_WAVE, 1, SL, TrialRandomness(3, pulse))
        (h,) = d.hidden
        assert d.outcome == ((1, 0) if h is HiddenVariable.TRANSMITTED else (0, 1))


def test_many_worlds_two_photons():
    bs = decide(ModelKind.MANY_WORLDS, 2, SL, TrialRandomness(0, 0))
    assert isinstance(bs, BranchSet)
    assert len(bs) == 4
    assert [b.branch_weight for b in bs] == [0.25] * 4
    # reference enumeration of the 2**2 path assignments
    paths = list(itertools.product("TR", repeat=2))
    expected = {((1 if "T" in p else 0), (1 if "R" in p else 0)) for p in paths}
    assert {b.outcome for b in bs} == expected


@pytest.mark.parametrize("n", [1, 2, 3, 5, 8])
def test_branch_weights_sum_to_one(n):
    bs = branch_set(n)
    assert len(bs) == 2**n
    assert math.fsum(b.branch_weight for b in bs) == 1.0
    for b in bs:
        assert len(b.photons_A) + len(b.photons_B) == n


def test_branch_cap():
    with pytest.raises(BranchCapExceeded):
        branch_set(17)
    with pytest.raises(BranchCapExceeded):
        decide(ModelKind.MANY_WORLDS, 5, SL, TrialRandomness(0, 0), branch_cap=16)


def test_negative_photons_rejected():
    with pytest.raises(ValueError):
        decide(ModelKind.NONLOCAL_COLLAPSE, -1, SL, TrialRandomness(0, 0))


def test_counterfactual_empty_wave():
    near = counterfactual_decide(ModelKind.EMPTY_WAVE, HiddenVariable.REFLECTED, 1.0)
    far = counterfactual_decide(ModelKind.EMPTY_WAVE, HiddenVariable.REFLECTED, 100.0)
    assert near == far and near.click_B and not near.click_A
    for d in (0.0, 3.3, 1e4):
        assert counterfactual_decide("empty_wave", "T", d).outcome == (1, 0)


@pytest.mark.parametrize("model", [m for m in ModelKind if m is not ModelKind.EMPTY_WAVE])
def test_counterfactual_undefined(model):
    with pytest.raises(CounterfactualUndefined, match="counterfactual undefined"):
        counterfactual_decide(model, HiddenVariable.REFLECTED, 1.0)


@pytest.mark.parametrize("model", ALL)
@pytest.mark.parametrize("form", ["spacelike", "timelike"])
def test_marginals(model, form, request):
    cfg = request.getfixturevalue(form)
    c = run(single_pair(cfg, model=model, n_pulses=200_000)).counts
    sigma = math.sqrt(0.25 / c.R_H)
    assert abs(c.R_HA / c.R_H - 0.5) < 3 * sigma
    assert abs(c.R_HB / c.R_H - 0.5) < 3 * sigma


@given(seed=st.integers(0, 2**63), pulse=st.integers(0, 2**32),
       model=st.sampled_from([ModelKind.NONLOCAL_COLLAPSE, ModelKind.EMPTY_WAVE]),
       sep=st.sampled_from([SL, TL]))
def test_exclusivity(seed, pulse, model, sep):
    d = decide(model, 1, sep, TrialRandomness(seed, pulse))
    assert d.click_A != d.click_B


def _table(cfg, model, seed):
    c = run(single_pair(cfg, model=model, n_pulses=1_000_000, master_seed=seed)).counts
    j = joint_from_counts(c)
    return [j[k] for k in ((1, 0), (0, 1), (1, 1), (0, 0))]


def _chi2_pvalue(a, b):
    table = np.array([a, b])
    table = table[:, table.sum(axis=0) > 0]
    if table.shape[1] < 2:
        return 1.0
    return stats.chi2_contingency(table).pvalue


def test_local_collapse_separation_sensitive(spacelike, timelike):
    p = _chi2_pvalue(_table(spacelike, "local_collapse", 1), _table(timelike, "local_collapse", 2))
    assert p < 1e-6


@pytest.mark.parametrize("model", ["nonlocal_collapse", "empty_wave", "many_worlds"])
def test_other_models_separation_invariant(model, spacelike, timelike):
    p = _chi2_pvalue(_table(spacelike, model, 1), _table(timelike, model, 2))
    assert p > 0.01


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_many_worlds_branch_average_equals_nonlocal(n):
    # nonlocal outcome classes by direct enumeration of routings
    expected = {(1, 0): 0.0, (0, 1): 0.0, (1, 1): 0.0, (0, 0): 0.0}
    for paths in itertools.product((0, 1), repeat=n):
        expected[(int(0 in paths), int(1 in paths))] += 0.5**n
    assert branch_set(n).outcome_weights() == expected


def test_analytic_joint_tables():
    assert analytic_joint("local_collapse", SL) == {(1, 1): .25, (0, 0): .25, (1, 0): .25, (0, 1): .25}
    for m in ALL:
        j = analytic_joint(m, TL)
        assert j[(1, 1)] == j[(0, 0)] == 0 and j[(1, 0)] == j[(0, 1)] == 0.5


def test_outcome_decision_weight_bounds():
    with pytest.raises(ValueError):
        OutcomeDecision((), (), 0.0)
    with pytest.raises(ValueError):
        BranchSet((OutcomeDecision((0,), (), 0.5),))
