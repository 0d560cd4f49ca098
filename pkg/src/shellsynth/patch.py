"""Compact JSON-patch encoding of context changes.

Four operation shapes are used::

    ["a", "/path", value]   # add
    ["=", "/path", value]   # replace
    ["r", "/path"]          # remove
    ["m", "/from", "/to"]   # move

Paths are RFC 6901 JSON pointers, so a filesystem key such as
``/home/u/x`` inside the ``fs`` section is addressed as ``/fs/~1home~1u~1x``.
:func:`diff_context` never emits moves; :func:`apply_patch` accepts them.
"""

from __future__ import annotations

import copy
import json
from typing import Any

ADD, REPLACE, REMOVE, MOVE = "a", "=", "r", "m"


class PatchError(ValueError):
    pass


def escape(key: str) -> str:
    return key.replace("~", "~0").replace("/", "~1")


def unescape(part: str) -> str:
    return part.replace("~1", "/").replace("~0", "~")


def split_pointer(pointer: str) -> list[str]:
    if pointer == "":
        return []
    if not pointer.startswith("/"):
        raise PatchError(f"invalid JSON pointer {pointer!r}")
    return [unescape(p) for p in pointer[1:].split("/")]


def _as_dict(snapshot: Any) -> Any:
    return snapshot.to_dict() if hasattr(snapshot, "to_dict") else snapshot


def diff_context(before: Any, after: Any) -> list[list]:
    """Ops turning ``before`` into ``after``.

    Dicts are compared recursively in sorted key order; anything else
    (lists included) is a leaf replaced wholesale.
    """
    ops: list[list] = []
    _diff(_as_dict(before), _as_dict(after), "", ops)
    return ops


def _diff(a: Any, b: Any, path: str, ops: list[list]) -> None:
    if isinstance(a, dict) and isinstance(b, dict):
        if a == b:
            return
        for key in sorted(set(a) | set(b)):
            sub = f"{path}/{escape(key)}"
            if key not in b:
                ops.append([REMOVE, sub])
            elif key not in a:
                ops.append([ADD, sub, copy.deepcopy(b[key])])
            else:
                _diff(a[key], b[key], sub, ops)
    elif a != b or type(a) is not type(b):
        ops.append([REPLACE, path, copy.deepcopy(b)])


def _parent(doc: Any, parts: list[str], pointer: str) -> tuple[Any, str]:
    if not parts:
        raise PatchError(f"operation on the document root is not supported: {pointer!r}")
    node = doc
    for part in parts[:-1]:
        if not isinstance(node, dict):
            raise PatchError(f"type mismatch at {pointer!r}: parent is not an object")
        if part not in node:
            raise PatchError(f"unresolvable path {pointer!r}")
        node = node[part]
    if not isinstance(node, dict):
        raise PatchError(f"type mismatch at {pointer!r}: parent is not an object")
    return node, parts[-1]


def apply_patch(before: Any, patch: list | str) -> Any:
    """Return a patched deep copy of ``before`` (a snapshot or plain dict)."""
    if isinstance(patch, str):
        patch = json.loads(patch)
    doc = copy.deepcopy(_as_dict(before))
    for op in patch:
        validate_op(op)
        code, path = op[0], op[1]
        parent, key = _parent(doc, split_pointer(path), path)
        if code == ADD:
            if key in parent:
                raise PatchError(f"add at existing path {path!r}")
            parent[key] = copy.deepcopy(op[2])
        elif code == REPLACE:
            if key not in parent:
                raise PatchError(f"unresolvable path {path!r}")
            parent[key] = copy.deepcopy(op[2])
        elif code == REMOVE:
            if key not in parent:
                raise PatchError(f"unresolvable path {path!r}")
            del parent[key]
        else:
            if key not in parent:
                raise PatchError(f"unresolvable path {path!r}")
            value = parent.pop(key)
            dest, dkey = _parent(doc, split_pointer(op[2]), op[2])
            if dkey in dest:
                raise PatchError(f"move onto existing path {op[2]!r}")
            dest[dkey] = value
    if hasattr(before, "to_dict") and hasattr(type(before), "from_dict"):
        return type(before).from_dict(doc)
    return doc


def validate_op(op: Any) -> None:
    if not isinstance(op, (list, tuple)) or not op:
        raise PatchError(f"malformed op {op!r}")
    arity = {ADD: 3, REPLACE: 3, REMOVE: 2, MOVE: 3}.get(op[0])
    if arity is None:
        raise PatchError(f"unknown op code {op[0]!r}")
    if len(op) != arity or not isinstance(op[1], str):
        raise PatchError(f"malformed {op[0]!r} op {op!r}")
    if op[0] == MOVE and not isinstance(op[2], str):
        raise PatchError(f"move target must be a pointer: {op!r}")


def dumps(patch: list) -> str:
    """Serialize a patch as a compact JSON string."""
    return json.dumps(patch, ensure_ascii=False)


def loads(text: str) -> list:
    patch = json.loads(text)
    if not isinstance(patch, list):
        raise PatchError("patch must be a JSON array")
    for op in patch:
        validate_op(op)
    return patch
