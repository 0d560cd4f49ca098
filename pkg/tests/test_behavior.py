import pytest
from hypothesis import given
from hypothesis import strategies as st

from shellsynth.behavior import (
    NoiseProfile,
    behaviors_differ,
    edit_similarity,
    levenshtein,
    levenshtein_within,
    max_edits,
    noise_threshold,
    similar_enough,
)
from shellsynth.executor.base import ContextSnapshot, ExecutionTrace

from oracles import levenshtein_recursive

short = st.text(alphabet="abc\n ", max_size=10)


@given(short, short)
def test_levenshtein_matches_recursive_oracle(a, b):
    assert levenshtein(a, b) == levenshtein_recursive(a, b)


@given(short, short, st.integers(0, 12))
def test_banded_distance_matches_oracle(a, b, k):
    d = levenshtein_recursive(a, b)
    assert levenshtein_within(a, b, k) == (d if d <= k else None)


@given(short, short, st.floats(-1.0, 1.0))
def test_threshold_check_equals_similarity_comparison(a, b, beta):
    assert similar_enough(a, b, beta) == (edit_similarity(a, b) >= beta)


def test_max_edits_boundary():
    # 1 - 1/20 = 0.95 exactly in floats
    assert max_edits(20, 0.95) == 1
    assert max_edits(3, 0.95) == 0


def test_similarity_examples():
    assert edit_similarity("abc", "abc") == 1.0
    assert edit_similarity("abc", "abd") == pytest.approx(2 / 3, abs=1e-9)
    assert edit_similarity("", "") == 1.0


@given(short, short)
def test_similarity_symmetry_and_bounds(a, b):
    s = edit_similarity(a, b)
    assert s == edit_similarity(b, a)
    assert 0.0 <= s <= 1.0
    assert (s == 1.0) == (a == b)


def test_beta_for_synthetic_triple():
    p = NoiseProfile.from_similarities([1.0, 1.0, 0.4])
    assert p.beta == pytest.approx(0.2343, abs=1e-4)
    assert p.trace_count == 3


def test_beta_clamps_on_deterministic_backend(sim):
    for cmd in ("echo hi", "ls -l", "cat nope", "df -h"):
        p = noise_threshold(sim, cmd, 3)
        assert p.beta == 0.95
        assert len(p.pairwise_sims) == 3


def test_noise_needs_two_traces(sim):
    with pytest.raises(ValueError):
        noise_threshold(sim, "echo", 1)


@given(st.lists(st.floats(0.0, 1.0), min_size=3, max_size=3), st.floats(0.0, 0.5))
def test_beta_bound_and_monotone_in_spread(sims, extra):
    p = NoiseProfile.from_similarities(sims)
    assert p.beta <= 0.95
    # widen the spread around the same mean
    mu = sum(sims) / 3
    wider = [mu + (s - mu) * (1 + extra) for s in sims]
    assert NoiseProfile.from_similarities(wider).beta <= p.beta + 1e-12


def _trace(code=0, out="x", env=None):
    before = ContextSnapshot()
    after = ContextSnapshot(env=env or {})
    return ExecutionTrace("cmd", out, code, before, after)


def test_behaviors_differ_cases():
    noise = NoiseProfile.deterministic()
    t = _trace()
    assert not behaviors_differ(t, t, noise)
    assert behaviors_differ(t, _trace(code=1), noise)
    assert behaviors_differ(t, _trace(env={"A": "1"}), noise)
    a, b = _trace(out="a" * 10), _trace(out="a" * 9 + "b")
    assert edit_similarity(a.output, b.output) == pytest.approx(0.9)
    assert behaviors_differ(a, b, noise)


@given(st.integers(0, 3), short, st.floats(-1.0, 1.0))
def test_delta_reflexive(code, out, beta):
    t = _trace(code, out)
    assert not behaviors_differ(t, t, NoiseProfile(beta, (1.0,), 2))

