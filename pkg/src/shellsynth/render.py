"""Marker-aware rendering of argument lists into shell input strings.

Arguments may carry a ``<ns>`` marker on either edge. Two neighbouring
arguments are joined without a space only when the left one ends with a
marker *and* the right one starts with one; every marker is stripped from
the rendered text::

    >>> render_args(["ls", "-l<ns>", "<ns>a<ns>", "<ns>T 32"])
    'ls -laT 32'

Command rows are flattened into a single token list. A row whose first
token is a connector (``&&``, ``||``, ``|``, ``>``, ``>>``) attaches to the
previous row; any other row is separated by a ``;`` token, which renders
glued to its left neighbour.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

NS = "<ns>"
SEPARATOR = ";"
CONNECTORS = ("&&", "||", "|", ">", ">>")
MAX_TOKEN_LEN = 64


def split_markers(token: str) -> tuple[bool, str, bool]:
    """Return ``(leading_marker, body, trailing_marker)`` for a token."""
    lead = token.startswith(NS)
    if lead:
        token = token[len(NS):]
    trail = token.endswith(NS)
    if trail:
        token = token[: -len(NS)]
    return lead, token, trail


def strip_markers(token: str) -> str:
    return split_markers(token)[1]


def visible_length(token: str) -> int:
    """Length of a token once edge markers are removed."""
    return len(strip_markers(token))


@dataclass(frozen=True)
class Boundary:
    """Location of one argument's body inside a rendered string."""

    start: int
    end: int
    lead: bool
    trail: bool


def render_with_boundaries(args: Sequence[str]) -> tuple[str, list[Boundary]]:
    parts: list[str] = []
    bounds: list[Boundary] = []
    pos = 0
    prev_trail = False
    have_prev = False
    for tok in args:
        lead, body, trail = split_markers(tok)
        if not body and not lead and not trail:
            bounds.append(Boundary(pos, pos, False, False))
            continue
        glued = have_prev and (body == SEPARATOR or (prev_trail and lead))
        if have_prev and not glued:
            parts.append(" ")
            pos += 1
        parts.append(body)
        bounds.append(Boundary(pos, pos + len(body), lead, trail))
        pos += len(body)
        prev_trail = trail
        have_prev = True
    return "".join(parts), bounds


def render_args(args: Sequence[str]) -> str:
    return render_with_boundaries(args)[0]


def split_rendered(text: str, bounds: Iterable[Boundary]) -> list[str]:
    """Inverse of :func:`render_with_boundaries`: recover the marked tokens."""
    out = []
    for b in bounds:
        tok = text[b.start:b.end]
        if b.lead:
            tok = NS + tok
        if b.trail:
            tok = tok + NS
        out.append(tok)
    return out


def is_connector(token: str) -> bool:
    return token in CONNECTORS


def flatten_rows(rows: Sequence[Sequence[str]]) -> list[str]:
    """Flatten command rows into one token list with explicit ``;`` joins."""
    flat: list[str] = []
    for row in rows:
        row = [t for t in row if t != ""]
        if not row:
            continue
        if flat and not is_connector(row[0]):
            flat.append(SEPARATOR)
        flat.extend(row)
    return flat


def render_rows(rows: Sequence[Sequence[str]]) -> str:
    return render_args(flatten_rows(rows))


def join_preamble(preamble: Sequence[str], args: Sequence[str]) -> str:
    """Render ``args`` behind the fixed ``cd <cwd>`` preamble row."""
    return render_rows([list(preamble), list(args)]) if args else render_args(preamble)


def split_rows(flat: Sequence[str]) -> list[list[str]]:
    """Undo :func:`flatten_rows`."""
    rows: list[list[str]] = []
    for tok in flat:
        if tok == SEPARATOR:
            rows.append([])
        elif is_connector(tok) or not rows:
            rows.append([tok])
        else:
            rows[-1].append(tok)
    return [r for r in rows if r]


def command_parts(row: Sequence[str]) -> tuple[list[str], list[str]]:
    """Split a row into its fixed head (connector and command) and arguments."""
    row = [t for t in row if t != ""]
    head = 2 if row and is_connector(row[0]) else 1
    return row[:head], row[head:]
