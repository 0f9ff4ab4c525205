import numpy as np
from hypothesis import given, strategies as st

from photon_decision import rng
from photon_decision.rng import Tag, TrialRandomness, TrialStream

seeds = st.integers(min_value=0, max_value=2**64 - 1)


@given(seed=seeds, pulse=st.integers(0, 2**40), slot=st.integers(0, 64))
def test_scalar_matches_vector(seed, pulse, slot):
    u = rng.uniform(seed, Tag.ROUTE, pulse, slot)
    v = rng.uniforms(seed, Tag.ROUTE, np.array([pulse]), slot)[0]
    m = rng.uniform_matrix(seed, Tag.ROUTE, np.array([pulse]), slot + 1)[0, slot]
    assert u == v == m
    assert 0.0 <= u < 1.0
    assert TrialStream(seed, Tag.ROUTE, pulse).at(slot) == u


def test_stream_next_walks_slots():
    s = TrialStream(7, Tag.PAIRS, 3)
    assert [s.next() for _ in range(4)] == [rng.uniform(7, Tag.PAIRS, 3, k) for k in range(4)]


def test_substreams_differ():
    pulses = np.arange(1000)
    a = rng.uniforms(1, Tag.A_EFF, pulses)
    b = rng.uniforms(1, Tag.B_EFF, pulses)
    c = rng.uniforms(2, Tag.A_EFF, pulses)
    assert not np.array_equal(a, b) and not np.array_equal(a, c)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.1


def test_uniformity():
    u = rng.uniforms(12345, Tag.ROUTE, np.arange(200_000))
    counts, _ = np.histogram(u, bins=20, range=(0, 1))
    expected = len(u) / 20
    chi2 = ((counts - expected) ** 2 / expected).sum()
    # 19 dof; 99.9th percentile is about 43.8
    assert chi2 < 43.8
    assert abs(u.mean() - 0.5) < 3 * np.sqrt(1 / 12 / len(u))


def test_trial_randomness_caches_streams():
    r = TrialRandomness(5, 9)
    assert r[Tag.ROUTE] is r[Tag.ROUTE]
    assert r[Tag.ROUTE].at(2) == rng.uniform(5, Tag.ROUTE, 9, 2)
