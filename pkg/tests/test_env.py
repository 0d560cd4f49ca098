import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shellsynth import patch as patchlib
from shellsynth.env import Action, EnvConfig, EpisodeFinished, ShellEnv
from shellsynth.executor import SimulatedBackend
from shellsynth.irreducibility import estimate_irreducibility


def make_env(**kw):
    backend = SimulatedBackend()
    return ShellEnv(backend, EnvConfig(**kw)), backend


def test_reset_and_shape():
    env, _ = make_env(max_commands=3, max_args=4)
    obs = env.reset(seed=0)
    assert env.shape == (3, 4)
    assert obs[0] == ("cd", "/home/ubuntu", "", "")
    assert obs[1] == obs[2] == ("",) * 4


def test_build_and_execute():
    env, backend = make_env(max_commands=3, max_args=4)
    env.reset(seed=0)
    for a in (Action("echo", False, True), Action("-n"), Action("hi")):
        r = env.step(a)
        assert r.reward == 0.0 and not r.done
    assert backend.executions == 0
    r = env.step(Action("", True, False))
    assert r.done and not r.truncated
    assert r.reward == 1.0
    rec = r.info["record"]
    assert rec.input == "cd /home/ubuntu; echo -n hi"
    assert rec.input_args == ["echo", "-n", "hi"]
    assert rec.output == "hi" and rec.exit_code == 0
    assert patchlib.loads(rec.context_patch) == r.info["patch"]


def test_reward_matches_estimate():
    env, _ = make_env(max_commands=2, max_args=6)
    env.reset(seed=3)
    env.step(Action("ls", False, True))
    for tok in ("-a", "-l", "/etc"):
        env.step(Action(tok))
    r = env.step(Action("", True))
    est = estimate_irreducibility(SimulatedBackend(), [["cd", "/home/ubuntu"], ["ls", "-a", "-l", "/etc"]], budget=64, seed=3)
    assert r.reward == est.score


def test_reward_can_be_disabled():
    env, _ = make_env(reward_enabled=False)
    env.reset(seed=0)
    env.step(Action("echo", False, True))
    r = env.step(Action("", True))
    assert r.done and r.reward == 0.0 and r.info["record"].irreducibility == 1.0


def test_preamble_only_session_executes():
    env, _ = make_env()
    env.reset(seed=0)
    r = env.step(Action("", True))
    assert r.done and r.info["record"].input == "cd /home/ubuntu"


@pytest.mark.parametrize("action", [Action("x", True, False), Action("", True, True), Action("y", True, True)])
def test_invalid_combinations_penalized(action):
    env, backend = make_env()
    env.reset(seed=0)
    r = env.step(action)
    assert r.done and r.reward == -10.0 and backend.executions == 0


def test_overlong_token_penalized():
    env, backend = make_env()
    env.reset(seed=0)
    r = env.step(Action("a" * 65))
    assert r.reward == -10.0 and r.done and backend.executions == 0
    env.reset(seed=0)
    assert not env.step(Action("a" * 64 + "<ns>")).done


def test_horizons_truncate():
    env, backend = make_env(max_commands=2, max_args=3)
    env.reset(seed=0)
    r = env.step(Action("echo", False, True))
    assert r.truncated and not r.done  # grid row budget exhausted
    r = env.step(Action("a"))
    r = env.step(Action("b"))
    assert r.truncated and not r.done
    r = env.step(Action("c"))
    assert r.done and r.truncated and r.reward == 0.0
    assert backend.executions == 0
    env.reset(seed=0)
    env.step(Action("echo", False, True))
    r = env.step(Action("ls", False, True))
    assert r.done and r.truncated


def test_step_contract():
    env, _ = make_env()
    with pytest.raises(EpisodeFinished):
        env.step(Action("echo"))
    env.reset(seed=0)
    env.step(Action("", True))
    with pytest.raises(EpisodeFinished):
        env.step(Action("echo"))
    env.reset(seed=1)
    assert not env.session.finished


def test_config_validation():
    for bad in ({"max_args": 1}, {"max_commands": 0}, {"subset_budget": 0}, {"noise_traces": 1}, {"start_dirs": []}):
        with pytest.raises(ValueError):
            EnvConfig(**bad).validate()


def test_reset_is_deterministic():
    env, _ = make_env(start_dirs=["/home/ubuntu", "/tmp", "/etc"])
    a = [env.reset(seed=s)[0][1] for s in range(20)]
    b = [env.reset(seed=s)[0][1] for s in range(20)]
    assert a == b and len(set(a)) > 1
    assert env.reset(seed=0, start_dir="/var")[0][1] == "/var"


def test_reset_reverts_context():
    env, _ = make_env()
    env.reset(seed=0)
    env.step(Action("touch", False, True))
    env.step(Action("new.txt"))
    r = env.step(Action("", True))
    assert "new.txt" in r.info["record"].context_patch
    env.reset(seed=0)
    env.step(Action("ls", False, True))
    r = env.step(Action("", True))
    assert "new.txt" not in r.info["record"].output


def test_composite_record_carries_commands():
    env, _ = make_env(max_commands=3, max_args=4)
    env.reset(seed=0)
    for a in (Action("export", False, True), Action("A=1"), Action("&&", False, True), Action("echo"), Action("-n"), Action("hi")):
        env.step(a)
    r = env.step(Action("", True))
    rec = r.info["record"]
    assert rec.input == "cd /home/ubuntu; export A=1 && echo -n hi"
    assert [c["command_index"] for c in rec.commands] == [1, 2]
    assert all("budget_used" not in c for c in rec.commands)


actions = st.tuples(
    st.sampled_from(["", "echo", "ls", "-a", "-n", "hi", "&&", "|", "x" * 70]),
    st.booleans(),
    st.booleans(),
)


@settings(max_examples=150)
@given(st.lists(actions, min_size=1, max_size=40), st.integers(0, 5))
def test_env_properties(seq, seed):
    cfg = dict(max_commands=3, max_args=4, subset_budget=4, noise_traces=2)
    env, backend = make_env(**cfg)
    obs = env.reset(seed=seed)
    shape = (cfg["max_commands"], cfg["max_args"])
    steps = 0
    for a in seq:
        a = Action(*a)
        before = backend.executions
        r = env.step(a)
        steps += 1
        assert (len(r.observation), len(r.observation[0])) == shape
        assert all(len(row) == shape[1] for row in r.observation)
        if not env.is_valid(a):
            assert r.done and r.reward == -10.0 and backend.executions == before
        elif not a.exec_action:
            assert backend.executions == before and r.reward == 0.0
        else:
            assert r.done and 0.0 <= r.reward <= 1.0
        if r.done:
            with pytest.raises(EpisodeFinished):
                env.step(Action("", True))
            break
    assert steps <= shape[0] * shape[1] + 1


@given(st.lists(st.booleans(), min_size=200, max_size=200), st.integers(2, 5), st.integers(2, 6))
def test_episodes_end_within_horizon(new_rows, h_g, h_l):
    env, backend = make_env(max_commands=h_g, max_args=h_l)
    env.reset(seed=0)
    steps = 0
    for n in new_rows:
        r = env.step(Action("echo", False, n))
        steps += 1
        if r.done:
            break
    assert r.done and r.truncated
    assert steps <= h_g * h_l + 1
    assert backend.executions == 0
