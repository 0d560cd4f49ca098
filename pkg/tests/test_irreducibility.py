import random
import statistics

import pytest
from hypothesis import given
from hypothesis import strategies as st

from shellsynth.behavior import NoiseProfile
from shellsynth.executor import ExecutionCache, SimulatedBackend
from shellsynth.irreducibility import (
    IrreducibilityReport,
    composite_irreducibility,
    estimate_irreducibility,
    exact_irreducibility,
    mae_by_budget,
    sample_subsets,
    subinput,
    weighted_summary,
)
from shellsynth.synthesis import synthesize_fixed_length

from oracles import irreducibility_bruteforce

PRE = ["cd", "/home/ubuntu"]


def test_subinput_examples():
    s = [["df", "-a", "--output=source", "-B 512K"]]
    assert subinput(s, 0, {0, 2}) == "df -a -B 512K"
    assert subinput(s, 0, set()) == "df"
    with pytest.raises(ValueError):
        subinput(s, 0, {0, 1, 2})
    with pytest.raises(IndexError):
        subinput(s, 0, {3})


def test_subinput_keeps_markers():
    s = [["ls", "-l<ns>", "<ns>a"]]
    assert subinput(s, 0, {0}) == "ls -l"
    assert subinput(s, 0, {1}) == "ls a"


def test_sample_subsets():
    masks, exact = sample_subsets(3, 100, 0)
    assert exact and sorted(masks) == list(range(7))
    masks, exact = sample_subsets(12, 32, 0)
    assert not exact and len(masks) == 32
    assert all(0 <= m < 4095 for m in masks)
    assert sample_subsets(12, 32, 5) == sample_subsets(12, 32, 5)


def test_sample_subsets_uniform():
    # budgets below 2^n - 1 draw with replacement; pool many seeds
    masks = [m for seed in range(1000) for m in sample_subsets(4, 14, seed)[0]]
    counts = [masks.count(m) for m in range(15)]
    assert len(masks) == 14_000
    assert min(counts) > 850 and max(counts) < 1150


def test_echo_examples(sim):
    r = exact_irreducibility(sim, ["echo", "-n", "hi"])
    assert r.score == 1.0 and r.mode == "exact"
    by_kept = {s.kept_indices: (s.delta, s.weight) for s in r.samples}
    assert by_kept == {(): (True, 0), (0,): (True, 1), (1,): (True, 1)}
    r = exact_irreducibility(sim, ["echo", "-q", "hi"])
    assert r.score == 0.5
    assert {s.kept_indices: s.delta for s in r.samples}[(1,)] is False


def test_degenerate_lengths(sim):
    assert exact_irreducibility(sim, ["ls"]).score == 1.0
    assert exact_irreducibility(sim, ["echo", "x"]).score == 1.0
    assert exact_irreducibility(sim, ["echo", "-q"]).score == 0.0
    assert estimate_irreducibility(sim, ["ls"], budget=4, seed=0).score == 1.0


@pytest.mark.parametrize("seed", range(12))
def test_exact_matches_bruteforce_oracle(toy, seed):
    rng = random.Random(seed)
    cmd = rng.choice(toy.commands)
    args = synthesize_fixed_length(toy, cmd, rng.randint(2, 5), rng)
    args = [a.replace("<ns>", "") for a in args]
    backend = SimulatedBackend()
    r = exact_irreducibility(backend, [PRE, args])
    assert r.score == irreducibility_bruteforce(backend, "cd /home/ubuntu; ", args, r.beta_used)


def test_estimate_with_full_budget_equals_exact(sim, toy):
    rng = random.Random(4)
    for _ in range(10):
        cmd = synthesize_fixed_length(toy, rng.choice(toy.commands), rng.randint(2, 6), rng)
        n = len(cmd) - 1
        ex = exact_irreducibility(sim, [PRE, cmd])
        est = estimate_irreducibility(sim, [PRE, cmd], budget=2**n - 1, seed=rng.randrange(99))
        assert est == ex


def test_fully_irreducible_at_any_budget(sim):
    s = [PRE, ["echo", "alpha", "beta", "gamma", "delta"]]
    assert exact_irreducibility(sim, s).score == 1.0
    for m in (1, 2, 5, 9):
        assert estimate_irreducibility(sim, s, budget=m, seed=m).score == 1.0


def test_estimate_mean_close_to_exact(sim, toy):
    rng = random.Random(10)
    cmd = synthesize_fixed_length(toy, "ls", 10, rng)
    cache = ExecutionCache()
    ex = exact_irreducibility(sim, [PRE, cmd], cache=cache)
    noise = NoiseProfile.deterministic()
    ests = [estimate_irreducibility(sim, [PRE, cmd], budget=64, seed=s, noise=noise, cache=cache).score for s in range(50)]
    assert abs(statistics.fmean(ests) - ex.score) <= 0.05


def test_budget_economy(toy):
    rng = random.Random(2)
    for _ in range(10):
        n = rng.randint(2, 8)
        cmd = synthesize_fixed_length(toy, rng.choice(toy.commands), n, rng)
        for m in (4, 16, 300):
            backend = SimulatedBackend()
            r = estimate_irreducibility(backend, [PRE, cmd], budget=m, seed=1, cache=ExecutionCache())
            assert backend.executions == r.budget_used
            assert r.budget_used <= min(m, 2**n - 1) + 1 + 3


def test_resample_when_only_empty_subset_drawn():
    # with n=2, M=1 the empty set is drawn a third of the time
    backend = SimulatedBackend()
    for seed in range(30):
        r = estimate_irreducibility(backend, ["echo", "a", "b"], budget=1, seed=seed)
        assert sum(s.weight for s in r.samples) > 0
    assert any(sample_subsets(2, 1, s)[0] == [0] for s in range(30))


def test_redundant_flag_lowers_score(sim):
    for args in (["hi"], ["a", "b"], ["-n", "x", "y"], ["hello", "world", "v1.0"]):
        base = exact_irreducibility(sim, [PRE, ["echo", *args]]).score
        with_q = exact_irreducibility(sim, [PRE, ["echo", "-q", *args]]).score
        assert with_q < base


def test_composite_prefix_constancy(sim):
    rows = [PRE, ["export", "A=1"], ["&&", "echo", "-n", "hi"]]
    rep = composite_irreducibility(sim, rows, budget=64, seed=0)
    second = rep.commands[1]
    assert second.command_index == 2
    assert all(s.rendered.startswith("cd /home/ubuntu; export A=1 && echo") for s in second.samples)
    first = rep.commands[0]
    assert all(s.rendered.startswith("cd /home/ubuntu; export") and "&&" not in s.rendered for s in first.samples)


def test_composite_single_command_matches_estimate(sim):
    rows = [PRE, ["ls", "-a", "text", "-l"]]
    comp = composite_irreducibility(sim, rows, budget=3, seed=5)
    est = estimate_irreducibility(sim, rows, 1, budget=3, seed=5)
    assert comp.commands[0].score == est.score and comp.score == est.score


def test_weighted_summary():
    def rep(score, n):
        return IrreducibilityReport(score, "exact", 0, n, 0.95)

    assert weighted_summary([rep(1.0, 2), rep(0.5, 2)]) == 0.75
    assert weighted_summary([rep(1.0, 0)]) == 1.0


def test_mae_zero_with_full_budget(toy):
    rng = random.Random(0)
    inputs = [[PRE, synthesize_fixed_length(toy, "echo", rng.randint(2, 5), rng)] for _ in range(5)]
    study = mae_by_budget(SimulatedBackend(), inputs, [4096], seeds=[0, 1])
    assert all(row["mae"] == 0.0 for row in study.rows())


def test_mae_csv(tmp_path, toy):
    rng = random.Random(0)
    inputs = [[PRE, synthesize_fixed_length(toy, "ls", 6, rng)] for _ in range(4)]
    study = mae_by_budget(SimulatedBackend(), inputs, [4, 16], seeds=range(3))
    path = tmp_path / "mae.csv"
    study.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "n_args,budget,mae,ci_lo,ci_hi"
    assert len(lines) == 3
    for row in study.rows():
        assert row["ci_lo"] <= row["mae"] <= row["ci_hi"]


@given(st.lists(st.sampled_from(["-n", "-q", "a", "bb", "text", "-a"]), min_size=0, max_size=5), st.integers(1, 40))
def test_scores_in_range(args, budget):
    backend = SimulatedBackend()
    r = estimate_irreducibility(backend, [PRE, ["echo", *args]], budget=budget, seed=budget)
    assert 0.0 <= r.score <= 1.0
    assert (r.mode == "exact") == (budget >= 2 ** len(args) - 1)
