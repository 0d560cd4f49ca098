"""Options-style leftmost expansion of grammar rows.

A row of symbols is expanded one *option* at a time. The option for
nonterminal ``n`` may start whenever ``n`` is the leftmost nonterminal of the
row, samples productions through its policy, and terminates as soon as the
leftmost nonterminal is something other than ``n``. Chaining options until
the row is all-terminal yields the command's arguments: each terminal is one
argument, and ``<ns>`` markers between terminals become edge markers on the
neighbouring arguments.

In ``"gcs"`` mode a policy only sees the productions of the nonterminal being
replaced; in ``"ucs"`` mode it sees every production in the grammar.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

from .grammar import MARKER, N, Grammar, Production, Symbol
from .render import NS, render_args

DEPTH_GUARD = 256
FORCED_STEP_CAP = 1_000_000
MODES = ("gcs", "ucs")

# (candidate production indices, rng) -> chosen position in candidates
Policy = Callable[[Sequence[int], random.Random], int]


def uniform_policy(candidates: Sequence[int], rng: random.Random) -> int:
    return rng.randrange(len(candidates))


class SynthesisError(RuntimeError):
    pass


@dataclass(frozen=True)
class DerivationState:
    row: tuple[Symbol, ...]
    steps_taken: int = 0
    rng_seed: int | None = None
    choices: tuple[tuple[str, int], ...] = ()

    @classmethod
    def start(cls, nonterminal: str, seed: int | None = None) -> "DerivationState":
        return cls(row=(N(nonterminal),), rng_seed=seed)

    @property
    def complete(self) -> bool:
        return leftmost_index(self.row) is None


def leftmost_index(row: Sequence[Symbol]) -> int | None:
    for i, s in enumerate(row):
        if s.is_nonterminal:
            return i
    return None


def leftmost_nonterminal(state: DerivationState | Sequence[Symbol]) -> str | None:
    """The selector: name of the first nonterminal in the row, if any."""
    row = state.row if isinstance(state, DerivationState) else state
    i = leftmost_index(row)
    return None if i is None else row[i].text


def _substitute(row: tuple[Symbol, ...], at: int, prod: Production) -> tuple[Symbol, ...]:
    new = row[:at] + prod.rhs + row[at + 1:]
    # adjacent markers left behind by epsilon yields collapse into one
    if MARKER in prod.rhs or not prod.rhs:
        out: list[Symbol] = []
        for s in new:
            if s == MARKER and out and out[-1] == MARKER:
                continue
            out.append(s)
        new = tuple(out)
    return new


@dataclass
class Option:
    """Temporally extended action expanding one nonterminal.

    Initiation: ``nonterminal`` is the leftmost nonterminal of the row.
    Termination: the leftmost nonterminal is anything else.
    """

    nonterminal: str
    grammar: Grammar
    mode: str = "gcs"
    policy: Policy = uniform_policy

    def can_initiate(self, row: Sequence[Symbol]) -> bool:
        return leftmost_nonterminal(row) == self.nonterminal

    def terminated(self, row: Sequence[Symbol]) -> bool:
        return leftmost_nonterminal(row) != self.nonterminal

    def candidates(self) -> Sequence[int]:
        if self.mode == "gcs":
            return self.grammar.production_indices(self.nonterminal)
        return range(len(self.grammar.productions))

    def run(self, state: DerivationState, rng: random.Random, limit: int) -> DerivationState:
        """Apply productions until termination or until ``limit`` steps were spent."""
        if not self.can_initiate(state.row):
            raise SynthesisError(f"option {self.nonterminal!r} cannot initiate here")
        row, steps, choices = state.row, state.steps_taken, list(state.choices)
        cands = self.candidates()
        while not self.terminated(row) and limit > 0:
            idx = cands[self.policy(cands, rng)]
            row = _substitute(row, leftmost_index(row), self.grammar.productions[idx])
            choices.append((self.nonterminal, idx))
            steps += 1
            limit -= 1
        return DerivationState(row, steps, state.rng_seed, tuple(choices))


def force_complete(state: DerivationState, grammar: Grammar, rng: random.Random) -> DerivationState:
    """Finish a row along shortest-derivation productions only."""
    row, steps, choices = state.row, state.steps_taken, list(state.choices)
    budget = FORCED_STEP_CAP
    while (at := leftmost_index(row)) is not None:
        if budget <= 0:
            raise SynthesisError("forced completion did not terminate; grammar is malformed")
        lhs = row[at].text
        opts = grammar.completion_indices(lhs)
        idx = opts[rng.randrange(len(opts))]
        row = _substitute(row, at, grammar.productions[idx])
        choices.append((lhs, idx))
        steps += 1
        budget -= 1
    return DerivationState(row, steps, state.rng_seed, tuple(choices))


def rollout_option(
    state: DerivationState,
    grammar: Grammar,
    mode: str = "gcs",
    policy: Policy = uniform_policy,
    rng: random.Random | None = None,
    guard: int = DEPTH_GUARD,
) -> DerivationState:
    """Chain options from ``state`` until its row is all-terminal.

    After ``guard`` production applications the remaining nonterminals are
    finished by :func:`force_complete`.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if state.complete:
        raise SynthesisError("row is already all-terminal")
    if rng is None:
        rng = random.Random(state.rng_seed)
    spent = 0
    while not state.complete:
        if spent >= guard:
            return force_complete(state, grammar, rng)
        opt = Option(leftmost_nonterminal(state), grammar, mode, policy)
        before = state.steps_taken
        state = opt.run(state, rng, guard - spent)
        spent += state.steps_taken - before
    return state


def row_arguments(row: Sequence[Symbol]) -> list[str]:
    """Turn a terminal (prefix of a) row into marked argument tokens."""
    args: list[str] = []
    pending = False
    for s in row:
        if s.kind == "ns":
            if args and not args[-1].endswith(NS):
                args[-1] += NS
            pending = True
        elif s.kind == "t":
            lead = NS if pending and not s.text.startswith(NS) else ""
            args.append(lead + s.text)
            pending = False
        else:
            break
    return args


@dataclass
class Derivation:
    text: str
    args: list[str]
    choices: tuple[tuple[str, int], ...]
    row: tuple[Symbol, ...] = field(repr=False, default=())


def synthesize_argument(
    grammar: Grammar,
    nonterminal: str,
    mode: str = "gcs",
    seed: int | None = None,
    policy: Policy = uniform_policy,
) -> Derivation:
    """Fully expand ``nonterminal`` and render its yield."""
    if nonterminal not in grammar.nonterminals:
        raise KeyError(f"unknown nonterminal {nonterminal!r}")
    state = rollout_option(DerivationState.start(nonterminal, seed), grammar, mode, policy)
    args = row_arguments(state.row)
    return Derivation(render_args(args), args, state.choices, state.row)


def replay(grammar: Grammar, nonterminal: str, choices: Sequence[tuple[str, int]]) -> tuple[Symbol, ...]:
    """Re-run a derivation record under strict leftmost rules.

    Raises :class:`SynthesisError` if any choice uses a production whose
    left-hand side is not the nonterminal being replaced.
    """
    row: tuple[Symbol, ...] = (N(nonterminal),)
    for lhs, idx in choices:
        at = leftmost_index(row)
        if at is None or row[at].text != lhs:
            raise SynthesisError(f"record expands {lhs!r} but leftmost is {row[at] if at is not None else None}")
        prod = grammar.productions[idx]
        if prod.lhs != lhs:
            raise SynthesisError(f"production {prod} does not rewrite {lhs!r}")
        row = _substitute(row, at, prod)
    if leftmost_index(row) is not None:
        raise SynthesisError("record leaves nonterminals unexpanded")
    return row


def iter_command_arguments(
    grammar: Grammar,
    nonterminal: str,
    rng: random.Random,
    mode: str = "gcs",
    max_args: int | None = None,
    policy: Policy = uniform_policy,
    guard: int = DEPTH_GUARD,
) -> Iterator[str]:
    """Yield arguments one at a time as options finalize them.

    An argument is emitted once no later expansion can change its markers.
    Expansion stops after ``max_args`` arguments (the local horizon).
    """
    state = DerivationState.start(nonterminal)
    emitted = 0
    since_emit = 0
    while True:
        at = leftmost_index(state.row)
        if at is None:
            final = state.row
        else:
            final = state.row[:at]
            if final and final[-1].kind == "t":
                final = final[:-1]
        args = row_arguments(final)
        for arg in args[emitted:]:
            if max_args is not None and emitted >= max_args:
                return
            yield arg
            emitted += 1
            since_emit = 0
        if at is None or (max_args is not None and emitted >= max_args):
            return
        if since_emit >= guard:
            state = force_complete(state, grammar, rng)
            continue
        before = state.steps_taken
        state = Option(state.row[at].text, grammar, mode, policy).run(state, rng, guard - since_emit)
        since_emit += state.steps_taken - before


def synthesize_command(
    grammar: Grammar,
    command: str,
    rng: random.Random,
    mode: str = "gcs",
    max_args: int | None = None,
    policy: Policy = uniform_policy,
) -> list[str]:
    """Command token followed by its synthesized arguments."""
    start = grammar.start_for(command)
    return [command, *iter_command_arguments(grammar, start, rng, mode, max_args, policy)]


def synthesize_fixed_length(
    grammar: Grammar,
    command: str,
    n_args: int,
    rng: random.Random,
    mode: str = "gcs",
    policy: Policy = uniform_policy,
    max_rounds: int = 1000,
) -> list[str]:
    """Exactly ``n_args`` arguments, concatenating independent derivations of
    the command's start symbol until enough are available."""
    start = grammar.start_for(command)
    args: list[str] = []
    for _ in range(max_rounds):
        if len(args) >= n_args:
            return [command, *args[:n_args]]
        args.extend(iter_command_arguments(grammar, start, rng, mode, n_args - len(args), policy))
    raise SynthesisError(f"could not reach {n_args} arguments for {command!r}")
