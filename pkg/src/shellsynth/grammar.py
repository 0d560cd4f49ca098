"""Command grammars: parsing, validation and minimum derivation depths.

Grammar files are plain UTF-8 text, one rule per line::

    # comments run to end of line
    %start df df_args            # command token -> start nonterminal
    %redirect out_file           # optional target for > / >> rows
    df_args ::= df_arg | df_arg df_args
    df_arg  ::= "-a" | out
    out     ::= "--output=" <ns> field
    field   ::= "source"
              | "target"         # a leading | continues the previous rule

Terminals are double-quoted, nonterminals are bare identifiers, ``<ns>`` is a
standalone adjacency marker and an empty alternative is an epsilon
production. Several rules may share a line when separated by ``;``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

from .render import NS, visible_length

MAX_TERMINAL_LEN = 64


class GrammarError(ValueError):
    """Raised for malformed or non-productive grammars."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.line = line
        self.col = col
        where = f"line {line}, column {col}: " if line is not None else ""
        super().__init__(where + message)


@dataclass(frozen=True)
class Symbol:
    kind: str  # "t" terminal, "n" nonterminal, "ns" adjacency marker
    text: str

    @property
    def is_nonterminal(self) -> bool:
        return self.kind == "n"

    def __repr__(self) -> str:
        if self.kind == "n":
            return f"<{self.text}>"
        if self.kind == "ns":
            return NS
        return repr(self.text)


def T(text: str) -> Symbol:
    return Symbol("t", text)


def N(name: str) -> Symbol:
    return Symbol("n", name)


MARKER = Symbol("ns", NS)


@dataclass(frozen=True)
class Production:
    lhs: str
    rhs: tuple[Symbol, ...]

    def __str__(self) -> str:
        body = " ".join(repr(s) for s in self.rhs) or "ε"
        return f"{self.lhs} ::= {body}"


@dataclass
class Grammar:
    nonterminals: frozenset[str]
    terminals: frozenset[str]
    start_symbols: dict[str, str]
    productions: tuple[Production, ...]
    min_depth: dict[str, int] = field(default_factory=dict)
    start: str | None = None
    redirect_target: str | None = None

    def __post_init__(self) -> None:
        by_lhs: dict[str, list[int]] = {}
        for i, p in enumerate(self.productions):
            by_lhs.setdefault(p.lhs, []).append(i)
        self._by_lhs = {k: tuple(v) for k, v in by_lhs.items()}
        if not self.min_depth:
            self.min_depth = compute_min_depth(self.productions)
        self._cost = tuple(self.production_cost(p) for p in self.productions)

    @property
    def commands(self) -> list[str]:
        return sorted(self.start_symbols)

    def production_indices(self, lhs: str) -> tuple[int, ...]:
        return self._by_lhs.get(lhs, ())

    def production_cost(self, prod: Production) -> int:
        inner = [self.min_depth[s.text] for s in prod.rhs if s.is_nonterminal]
        return 1 + max(inner, default=0)

    def completion_indices(self, lhs: str) -> tuple[int, ...]:
        """Productions of ``lhs`` lying on a shortest path to an all-terminal yield."""
        best = self.min_depth[lhs]
        return tuple(i for i in self._by_lhs[lhs] if self._cost[i] == best)

    def start_for(self, command: str) -> str:
        try:
            return self.start_symbols[command]
        except KeyError:
            raise KeyError(f"grammar has no start symbol for command {command!r}") from None


def compute_min_depth(productions) -> dict[str, int]:
    """Fixpoint over productions; non-productive nonterminals are absent."""
    depth: dict[str, int] = {}
    changed = True
    while changed:
        changed = False
        for p in productions:
            inner = []
            for s in p.rhs:
                if s.is_nonterminal:
                    if s.text not in depth:
                        break
                    inner.append(depth[s.text])
            else:
                d = 1 + max(inner, default=0)
                if d < depth.get(p.lhs, d + 1):
                    depth[p.lhs] = d
                    changed = True
    return depth


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t]+)
  | (?P<comment>\#.*)
  | (?P<define>::=)
  | (?P<bar>\|)
  | (?P<semi>;)
  | (?P<marker><ns>)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<ident>[A-Za-z_][A-Za-z0-9_.\-]*)
    """,
    re.VERBOSE,
)


def _tokenize(line: str, lineno: int) -> Iterator[tuple[str, str, int]]:
    pos = 0
    while pos < len(line):
        m = _TOKEN_RE.match(line, pos)
        if m is None:
            raise GrammarError(f"unexpected character {line[pos]!r}", lineno, pos + 1)
        kind = m.lastgroup
        if kind not in ("ws", "comment"):
            yield kind, m.group(), pos + 1
        pos = m.end()


def _unquote(s: str) -> str:
    return re.sub(r"\\(.)", r"\1", s[1:-1])


def parse_grammar(text: str) -> Grammar:
    """Parse grammar source text and validate it."""
    rules: list[tuple[str, list[tuple[Symbol, int, int]], int]] = []
    starts: dict[str, tuple[str, int, int]] = {}
    redirect: tuple[str, int, int] | None = None
    current: list | None = None  # alternatives of the rule being read

    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if stripped.startswith("%"):
            parts = stripped.split("#", 1)[0].split()
            col = raw.index("%") + 1
            if parts[0] == "%start" and len(parts) == 3:
                starts[parts[1]] = (parts[2], lineno, col)
            elif parts[0] == "%redirect" and len(parts) == 2:
                redirect = (parts[1], lineno, col)
            else:
                raise GrammarError(f"bad directive {stripped!r}", lineno, col)
            current = None
            continue

        tokens = list(_tokenize(raw, lineno))
        i = 0
        if tokens and tokens[0][0] == "bar":
            if current is None:
                raise GrammarError("continuation '|' without a rule", lineno, tokens[0][2])
            current.append([])
            i = 1
        elif tokens:
            current = None
        while i < len(tokens):
            kind, value, col = tokens[i]
            if kind == "ident" and i + 1 < len(tokens) and tokens[i + 1][0] == "define":
                current = [[]]
                rules.append((value, current, lineno))
                i += 2
                continue
            if current is None:
                raise GrammarError(f"expected 'name ::=' but found {value!r}", lineno, col)
            if kind == "bar":
                current.append([])
            elif kind == "semi":
                current = None
            elif kind == "string":
                body = _unquote(value)
                if body:
                    current[-1].append((T(body), lineno, col))
            elif kind == "marker":
                current[-1].append((MARKER, lineno, col))
            elif kind == "ident":
                current[-1].append((N(value), lineno, col))
            else:
                raise GrammarError(f"unexpected {value!r}", lineno, col)
            i += 1

    if not rules:
        raise GrammarError("no start symbol: grammar defines no rules")

    lhs_names = {name for name, _, _ in rules}
    productions: list[Production] = []
    terminals: set[str] = set()
    for name, alts, _ in rules:
        for alt in alts:
            for sym, line, col in alt:
                if sym.is_nonterminal and sym.text not in lhs_names:
                    raise GrammarError(f"undefined nonterminal {sym.text!r}", line, col)
                if sym.kind == "t":
                    if visible_length(sym.text) > MAX_TERMINAL_LEN:
                        raise GrammarError(
                            f"terminal longer than {MAX_TERMINAL_LEN} characters", line, col
                        )
                    terminals.add(sym.text)
            productions.append(Production(name, _collapse_markers([s for s, _, _ in alt])))

    clash = terminals & lhs_names
    if clash:
        raise GrammarError(f"names used both as terminal and nonterminal: {sorted(clash)}")

    for command, (nt, line, col) in starts.items():
        if nt not in lhs_names:
            raise GrammarError(f"start symbol {nt!r} for {command!r} is undefined", line, col)
    if redirect is not None and redirect[0] not in lhs_names:
        raise GrammarError(f"redirect target {redirect[0]!r} is undefined", redirect[1], redirect[2])

    depth = compute_min_depth(productions)
    dead = [(name, line) for name, _, line in rules if name not in depth]
    if dead:
        name, line = dead[0]
        raise GrammarError(f"non-productive nonterminal {name!r} has no finite terminal yield", line, 1)

    return Grammar(
        nonterminals=frozenset(lhs_names),
        terminals=frozenset(terminals),
        start_symbols={c: nt for c, (nt, _, _) in starts.items()},
        productions=tuple(productions),
        min_depth=depth,
        start=rules[0][0],
        redirect_target=redirect[0] if redirect else None,
    )


def _collapse_markers(syms: list[Symbol]) -> tuple[Symbol, ...]:
    out: list[Symbol] = []
    for s in syms:
        if s == MARKER and out and out[-1] == MARKER:
            continue
        out.append(s)
    return tuple(out)


def load_grammar(path: str | Path) -> Grammar:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"grammar file not found: {path}")
    return parse_grammar(path.read_text(encoding="utf-8"))


def bundled_grammar_path() -> Path:
    return Path(__file__).parent / "data" / "toy.grammar"


def load_bundled_grammar() -> Grammar:
    return load_grammar(bundled_grammar_path())
