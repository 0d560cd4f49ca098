import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from shellsynth.grammar import N, T, parse_grammar
from shellsynth.render import render_args, strip_markers
from shellsynth.synthesis import (
    DEPTH_GUARD,
    DerivationState,
    Option,
    SynthesisError,
    force_complete,
    iter_command_arguments,
    replay,
    rollout_option,
    synthesize_argument,
    synthesize_command,
    synthesize_fixed_length,
)

from oracles import finite_language, reachable_yields

DF_TEXT = 'args ::= "-a" | out ; out ::= "--output=" <ns> field ; field ::= "source" | "target"'


@pytest.fixture(scope="module")
def df():
    return parse_grammar(DF_TEXT)


def test_rollout_from_out_gives_output_field(df):
    for seed in range(20):
        state = rollout_option(DerivationState.start("out", seed), df, "gcs")
        assert state.complete
        assert render_args(synthesize_argument(df, "out", "gcs", seed).args) in {
            "--output=source",
            "--output=target",
        }


def test_rollout_requires_a_nonterminal(df):
    with pytest.raises(SynthesisError):
        rollout_option(DerivationState((T("-a"),)), df)


def test_option_initiation_and_termination(df):
    opt = Option("out", df)
    assert opt.can_initiate((N("out"),))
    assert not opt.can_initiate((N("field"),))
    assert opt.terminated((T("--output="), N("field")))
    with pytest.raises(SynthesisError):
        opt.run(DerivationState.start("field"), random.Random(0), 10)


def test_ucs_can_leave_the_current_nonterminal(df):
    yields = {synthesize_argument(df, "out", "ucs", seed).text for seed in range(200)}
    assert "-a" in yields
    assert yields <= reachable_yields(df, "out", "ucs", 12)


def test_ucs_superset_of_gcs_small(df):
    for nt in ("args", "out", "field"):
        gcs = reachable_yields(df, nt, "gcs", 6)
        ucs = reachable_yields(df, nt, "ucs", 6)
        assert gcs and gcs <= ucs
        assert finite_language(df, nt) == gcs


def test_ucs_superset_of_gcs_bundled(toy):
    for nt in ("field", "out", "size", "digit", "value"):
        assert reachable_yields(toy, nt, "gcs", 2) <= reachable_yields(toy, nt, "ucs", 2)


def test_gcs_samples_in_language(toy):
    language = finite_language(toy, "args")
    for seed in range(200):
        d = synthesize_argument(toy, "args", "gcs", seed)
        assert d.text in language
    assert synthesize_argument(toy, "args", "gcs", 7).text in language


def test_field_only_two_yields(toy):
    assert {synthesize_argument(toy, "field", "gcs", s).text for s in range(50)} == {"source", "target"}


def test_synthesis_is_deterministic(toy):
    for mode in ("gcs", "ucs"):
        a = synthesize_argument(toy, "ls_args", mode, 11)
        b = synthesize_argument(toy, "ls_args", mode, 11)
        assert a == b


@given(st.integers(0, 10_000), st.sampled_from(["echo_args", "ls_args", "export_args", "df_args", "rm_args"]))
def test_gcs_records_replay(toy, seed, nt):
    d = synthesize_argument(toy, nt, "gcs", seed)
    assert replay(toy, nt, d.choices) == d.row


def test_ucs_records_do_not_replay_under_gcs(toy):
    failures = 0
    for seed in range(50):
        d = synthesize_argument(toy, "echo_args", "ucs", seed)
        try:
            replay(toy, "echo_args", d.choices)
        except SynthesisError:
            failures += 1
    assert failures > 0


def test_depth_guard_forces_completion():
    g = parse_grammar('a ::= "x" a | "y"')
    # a policy that always recurses would never stop without the guard
    always_recurse = lambda cands, rng: 0  # noqa: E731
    state = rollout_option(DerivationState.start("a", 0), g, "gcs", always_recurse)
    assert state.complete
    assert state.steps_taken == DEPTH_GUARD + 1
    assert [s.text for s in state.row].count("x") == DEPTH_GUARD


def test_force_complete_uses_min_depth_productions(toy):
    rng = random.Random(0)
    state = force_complete(DerivationState.start("echo_args"), toy, rng)
    assert state.complete
    for lhs, idx in state.choices:
        assert idx in toy.completion_indices(lhs)


def test_iter_command_arguments_respects_horizon(toy):
    rng = random.Random(3)
    for _ in range(50):
        args = list(iter_command_arguments(toy, "echo_args", rng, "gcs", 3))
        assert len(args) <= 3


def test_incremental_arguments_match_full_expansion(toy):
    for seed in range(50):
        a = synthesize_command(toy, "ls", random.Random(seed), "gcs")
        d = synthesize_argument(toy, "ls_args", "gcs", seed)
        assert render_args(a[1:]) == d.text


def test_fixed_length(toy):
    rng = random.Random(0)
    for n in range(1, 13):
        cmd = synthesize_fixed_length(toy, "echo", n, rng)
        assert cmd[0] == "echo" and len(cmd) == n + 1
        assert all(len(strip_markers(a)) <= 64 for a in cmd)


def test_epsilon_yield_is_dropped():
    g = parse_grammar('%start x a\na ::= "" | "" "k"\n')
    seen = {tuple(synthesize_command(g, "x", random.Random(s))) for s in range(20)}
    assert seen == {("x",), ("x", "k")}
