"""Episodic session-building environment.

The state is a grid of ``max_commands`` rows by ``max_args`` columns. Row 0
holds the fixed ``cd <dir>`` preamble. Each action is a triple
``(s, e, n)``: append ``s`` to the current row (``e=0, n=0``), start a new
row with ``s`` as its first token (``n=1``), or execute the session
(``e=1`` with empty ``s``). Invalid combinations end the episode with the
configured penalty and never reach the executor.

Column 0 of each row is the command (or a connector), so ``max_args``
counts the command token too.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Any, NamedTuple, Sequence

from . import patch as patchlib
from .behavior import DEFAULT_NOISE_TRACES
from .dataset import ShioRecord
from .executor.base import ExecutionCache, ExecutionTrace, ExecutorBackend, ExecutorError, execute_cached
from .irreducibility import CompositeReport, composite_irreducibility
from .render import MAX_TOKEN_LEN, flatten_rows, join_preamble, visible_length


class ShellEnvError(RuntimeError):
    """The executor failed; distinct from a contract violation by the agent."""


class EpisodeFinished(RuntimeError):
    pass


@dataclass
class EnvConfig:
    max_commands: int = 4
    max_args: int = 12
    start_dirs: list[str] = field(default_factory=lambda: ["/home/ubuntu"])
    arg_max_len: int = MAX_TOKEN_LEN
    subset_budget: int = 64
    noise_traces: int = DEFAULT_NOISE_TRACES
    invalid_penalty: float = -10.0
    reward_enabled: bool = True

    def validate(self) -> None:
        if self.max_commands < 1:
            raise ValueError("max_commands must be >= 1")
        if self.max_args < 2:
            # row 0 needs room for "cd <dir>"
            raise ValueError("max_args must be >= 2")
        if self.subset_budget < 1:
            raise ValueError("subset_budget must be >= 1")
        if self.noise_traces < 2:
            raise ValueError("noise_traces must be >= 2")
        if not self.start_dirs:
            raise ValueError("start_dirs must not be empty")
        if self.arg_max_len < 1:
            raise ValueError("arg_max_len must be positive")


class Action(NamedTuple):
    input_addition: str = ""
    exec_action: bool = False
    new_global: bool = False


@dataclass
class Session:
    rows: list[list[str]]
    cursor: tuple[int, int]
    finished: bool = False

    @property
    def preamble(self) -> list[str]:
        return self.rows[0]

    def command_rows(self) -> list[list[str]]:
        """Rows after the preamble with empty cells dropped."""
        out = []
        for row in self.rows[1:]:
            row = [t for t in row if t != ""]
            if row:
                out.append(row)
        return out

    def input_args(self) -> list[str]:
        return flatten_rows(self.command_rows())

    def render(self) -> str:
        return join_preamble(self.preamble, self.input_args())


@dataclass
class StepResult:
    observation: tuple[tuple[str, ...], ...]
    reward: float
    done: bool
    truncated: bool
    info: dict[str, Any] | None = None


def render_session(session: Session) -> tuple[str, list[str]]:
    """Executable input string plus the flat, marker-preserving argument list."""
    return session.render(), session.input_args()


class ShellEnv:
    """One environment owns one backend; do not interleave step calls."""

    def __init__(
        self,
        backend: ExecutorBackend,
        config: EnvConfig | None = None,
        cache: ExecutionCache | None = None,
    ):
        self.config = config or EnvConfig()
        self.config.validate()
        self.backend = backend
        self.cache = cache if cache is not None else ExecutionCache()
        self.session: Session | None = None
        self._seed = None
        self._episode = 0

    # -- observation ------------------------------------------------------
    def observation(self) -> tuple[tuple[str, ...], ...]:
        cfg = self.config
        grid = []
        for h in range(cfg.max_commands):
            row = self.session.rows[h] if self.session and h < len(self.session.rows) else []
            grid.append(tuple(row) + ("",) * (cfg.max_args - len(row)))
        return tuple(grid)

    @property
    def shape(self) -> tuple[int, int]:
        return self.config.max_commands, self.config.max_args

    # -- episode control --------------------------------------------------
    def reset(self, seed=None, start_dir: str | None = None):
        cfg = self.config
        rng = random.Random(seed)
        self._seed = seed
        c0 = start_dir if start_dir is not None else rng.choice(cfg.start_dirs)
        try:
            self.backend.revert()
        except Exception as exc:
            raise ShellEnvError(f"executor unavailable: {exc}") from exc
        self.session = Session(rows=[["cd", c0]], cursor=(0, 1))
        self._episode += 1
        return self.observation()

    def _finish(self, reward: float, truncated: bool = False, info=None) -> StepResult:
        self.session.finished = True
        return StepResult(self.observation(), reward, True, truncated, info)

    def is_valid(self, action: Action) -> bool:
        s, e, n = action
        if e and (s != "" or n):
            return False
        return visible_length(s) <= self.config.arg_max_len

    def step(self, action: Action | Sequence) -> StepResult:
        if self.session is None:
            raise EpisodeFinished("call reset() before step()")
        if self.session.finished:
            raise EpisodeFinished("episode is finished; call reset()")
        action = Action(*action)
        s, e, n = action
        cfg = self.config
        if not isinstance(s, str) or not self.is_valid(action):
            return self._finish(cfg.invalid_penalty)
        h, l = self.session.cursor
        if e:
            return self._execute()
        if n:
            if h + 1 >= cfg.max_commands:
                return self._finish(0.0, truncated=True)
            self.session.rows.append([s])
            self.session.cursor = (h + 1, 0)
            truncated = h + 1 == cfg.max_commands - 1
            return StepResult(self.observation(), 0.0, False, truncated)
        if l + 1 >= cfg.max_args:
            return self._finish(0.0, truncated=True)
        self.session.rows[h].append(s)
        self.session.cursor = (h, l + 1)
        return StepResult(self.observation(), 0.0, False, l + 2 == cfg.max_args)

    # -- execution --------------------------------------------------------
    def scoring_rows(self) -> list[list[str]]:
        return [self.session.preamble, *self.session.command_rows()]

    def _execute(self) -> StepResult:
        cfg = self.config
        text, args = render_session(self.session)
        rows = self.scoring_rows()
        try:
            trace = execute_cached(self.backend, self.cache, text)
            report = composite_irreducibility(
                self.backend, rows, cfg.subset_budget, self._seed, self.cache, cfg.noise_traces
            )
        except ExecutorError as exc:
            raise ShellEnvError(str(exc)) from exc
        record = build_record(0, rows, args, trace, report)
        info = {"trace": trace, "patch": trace.patch, "report": report, "record": record}
        reward = report.score if cfg.reward_enabled else 0.0
        return self._finish(reward, info=info)


def build_record(
    session_id: int,
    rows: Sequence[Sequence[str]],
    args: Sequence[str],
    trace: ExecutionTrace,
    report: CompositeReport,
) -> ShioRecord:
    commands = None
    if len(report.commands) > 1:
        # budget_used depends on cache state, so it stays out of records
        commands = [{k: v for k, v in r.to_dict().items() if k != "budget_used"} for r in report.commands]
    return ShioRecord(
        session_id=session_id,
        input=trace.input,
        input_args=list(args),
        exit_code=trace.exit_code,
        output=trace.output,
        context_patch=patchlib.dumps(trace.patch),
        irreducibility=report.score,
        commands=commands,
    )


__all__ = [
    "Action",
    "EnvConfig",
    "ShellEnvError",
    "EpisodeFinished",
    "Session",
    "ShellEnv",
    "StepResult",
    "build_record",
    "render_session",
]
