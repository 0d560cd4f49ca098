"""Execution backends behind a snapshot/revert contract."""

from .base import (
    TIMEOUT_EXIT,
    ContextSnapshot,
    ExecutionCache,
    ExecutionTrace,
    ExecutorBackend,
    ExecutorError,
    RunResult,
    execute,
    execute_cached,
)
from .sandbox import SandboxBackend
from .simulated import SimulatedBackend, SimShell, load_manifest

__all__ = [
    "TIMEOUT_EXIT",
    "ContextSnapshot",
    "ExecutionCache",
    "ExecutionTrace",
    "ExecutorBackend",
    "ExecutorError",
    "RunResult",
    "SandboxBackend",
    "SimShell",
    "SimulatedBackend",
    "execute",
    "execute_cached",
    "load_manifest",
]
