from __future__ import annotations

import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any

from ..patch import diff_context

SECTIONS = ("cwd", "env", "fs", "groups", "shell_opts", "limits", "firewall")
TIMEOUT_EXIT = 124


class ExecutorError(RuntimeError):
    """Backend failure, as opposed to a command that merely exits non-zero."""


@dataclass
class ContextSnapshot:
    cwd: str = "/"
    env: dict[str, str] = field(default_factory=dict)
    fs: dict[str, dict[str, Any]] = field(default_factory=dict)
    groups: list[str] = field(default_factory=list)
    shell_opts: dict[str, Any] = field(default_factory=dict)
    limits: dict[str, Any] = field(default_factory=dict)
    firewall: list[Any] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "cwd": self.cwd,
            "env": dict(sorted(self.env.items())),
            "fs": {p: dict(sorted(r.items())) for p, r in sorted(self.fs.items())},
            "groups": list(self.groups),
            "shell_opts": dict(sorted(self.shell_opts.items())),
            "limits": dict(sorted(self.limits.items())),
            "firewall": list(self.firewall),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ContextSnapshot":
        extra = set(d) - set(SECTIONS)
        if extra:
            raise ValueError(f"unknown snapshot sections: {sorted(extra)}")
        return cls(**{k: d[k] for k in SECTIONS if k in d})


@dataclass
class ExecutionTrace:
    input: str
    output: str
    exit_code: int
    before: ContextSnapshot
    after: ContextSnapshot

    @cached_property
    def patch(self) -> list[list]:
        return diff_context(self.before, self.after)


@dataclass
class RunResult:
    output: str
    exit_code: int
    after: ContextSnapshot


class ExecutorBackend(ABC):
    """A snapshot/revert execution target.

    ``run`` may mutate backend state; ``revert`` must restore the pristine
    state so that :meth:`current_snapshot` equals :meth:`pristine_snapshot`.
    """

    capabilities: frozenset[str] = frozenset(SECTIONS)
    deterministic: bool = False

    def __init__(self) -> None:
        self.executions = 0

    @abstractmethod
    def pristine_snapshot(self) -> ContextSnapshot: ...

    @abstractmethod
    def current_snapshot(self) -> ContextSnapshot: ...

    @abstractmethod
    def run(self, command: str) -> RunResult: ...

    @abstractmethod
    def revert(self) -> None: ...

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def execute(backend: ExecutorBackend, command: str) -> ExecutionTrace:
    """Run ``command`` from the pristine state and revert afterwards."""
    before = backend.pristine_snapshot()
    try:
        res = backend.run(command)
    finally:
        backend.revert()
    backend.executions += 1
    return ExecutionTrace(command, res.output, res.exit_code, before, res.after)


class ExecutionCache:
    """Traces keyed by the exact input string; safe to share between threads."""

    def __init__(self, enabled: bool = True):
        self.enabled = enabled
        self._traces: dict[str, ExecutionTrace] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def get(self, command: str) -> ExecutionTrace | None:
        with self._lock:
            trace = self._traces.get(command)
            if trace is not None:
                self.hits += 1
            return trace

    def put(self, trace: ExecutionTrace) -> None:
        with self._lock:
            self._traces[trace.input] = trace

    def __len__(self) -> int:
        return len(self._traces)

    def __contains__(self, command: str) -> bool:
        return command in self._traces

    def clear(self) -> None:
        with self._lock:
            self._traces.clear()


def execute_cached(backend: ExecutorBackend, cache: ExecutionCache | None, command: str) -> ExecutionTrace:
    if cache is None or not cache.enabled:
        return execute(backend, command)
    trace = cache.get(command)
    if trace is None:
        trace = execute(backend, command)
        with cache._lock:
            cache.misses += 1
        cache.put(trace)
    return trace
