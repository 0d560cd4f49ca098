"""Irreducibility: how much of an input's behavior depends on each argument.

For an input with ``n`` arguments, every proper subset ``O`` of argument
indices defines a sub-input keeping only those arguments (in order). With
``delta(O)`` = 1 when the sub-input behaves differently from the full input,
the exact score is::

    sum(|O| * delta(O)) / sum(|O|)      over all proper subsets O

and the budgeted estimate uses the same ratio over ``M`` subsets drawn
uniformly with replacement. Argument indices are 0-based here.
"""

from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .behavior import DEFAULT_NOISE_TRACES, NoiseProfile, behaviors_differ, noise_threshold
from .executor.base import ExecutionCache, ExecutorBackend, execute_cached
from .render import command_parts, render_rows

Rows = Sequence[Sequence[str]]


@dataclass(frozen=True)
class SubsetSample:
    kept_indices: tuple[int, ...]
    weight: int
    delta: bool
    rendered: str


@dataclass
class IrreducibilityReport:
    score: float
    mode: str  # "exact" | "estimated"
    budget_used: int
    n_args: int
    beta_used: float
    samples: list[SubsetSample] = field(default_factory=list, repr=False)
    command_index: int = 0

    def to_dict(self, with_samples: bool = False) -> dict:
        d = {
            "score": self.score,
            "mode": self.mode,
            "budget_used": self.budget_used,
            "n_args": self.n_args,
            "beta_used": self.beta_used,
            "command_index": self.command_index,
        }
        if with_samples:
            d["samples"] = [
                {**asdict(s), "kept_indices": list(s.kept_indices)} for s in self.samples
            ]
        return d


def as_rows(session) -> list[list[str]]:
    """Accept a session object, a list of rows, or one flat command row."""
    rows = getattr(session, "rows", session)
    if rows and isinstance(rows[0], str):
        return [list(rows)]
    return [list(r) for r in rows]


def _mask_indices(mask: int, n: int) -> tuple[int, ...]:
    return tuple(i for i in range(n) if mask >> i & 1)


def subinput(session, command_index: int, kept: Iterable[int]) -> str:
    """Render rows before ``command_index`` verbatim, then that row with only
    the ``kept`` arguments; later rows are dropped."""
    rows = as_rows(session)
    head, args = command_parts(rows[command_index])
    kept = sorted(set(kept))
    if any(i < 0 or i >= len(args) for i in kept):
        raise IndexError(f"kept indices {kept} out of range for {len(args)} arguments")
    if len(args) and len(kept) == len(args):
        raise ValueError("kept set must be a proper subset of the arguments")
    return render_rows([*rows[:command_index], head + [args[i] for i in kept]])


def full_input(session, command_index: int) -> str:
    rows = as_rows(session)
    return render_rows(rows[: command_index + 1])


def sample_subsets(n: int, budget: int, seed=None) -> tuple[list[int], bool]:
    """Subset bitmasks to contrast and whether they form the full enumeration.

    With ``budget >= 2**n - 1`` every proper subset is returned once;
    otherwise ``budget`` masks are drawn uniformly, with replacement, from the
    proper subsets.
    """
    if budget < 1:
        raise ValueError("budget must be positive")
    total = (1 << n) - 1
    if budget >= total:
        return list(range(total)), True
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return [int(m) for m in rng.integers(0, total, size=budget)], False


class _Contrast:
    """Evaluates delta for sub-inputs of one command row, memoized by mask."""

    def __init__(self, backend, rows, command_index, noise, cache, noise_traces):
        self.backend = backend
        self.rows = rows
        self.j = command_index
        self.cache = cache if cache is not None else ExecutionCache()
        self.n = len(command_parts(rows[command_index])[1])
        start = backend.executions
        self.full = execute_cached(backend, self.cache, full_input(rows, command_index))
        if noise is None:
            noise = noise_threshold(backend, self.full.input, noise_traces)
        self.noise = noise
        self.spent = backend.executions - start
        self._memo: dict[int, SubsetSample] = {}

    def sample(self, mask: int) -> SubsetSample:
        s = self._memo.get(mask)
        if s is None:
            kept = _mask_indices(mask, self.n)
            text = subinput(self.rows, self.j, kept)
            start = self.backend.executions
            trace = execute_cached(self.backend, self.cache, text)
            self.spent += self.backend.executions - start
            s = SubsetSample(kept, len(kept), behaviors_differ(self.full, trace, self.noise), text)
            self._memo[mask] = s
        return s

    def report(self, masks: list[int], mode: str) -> IrreducibilityReport:
        samples = [self.sample(m) for m in masks]
        num = sum(s.weight for s in samples if s.delta)
        den = sum(s.weight for s in samples)
        if self.n == 0:
            score = 1.0
        elif self.n == 1:
            score = 1.0 if samples[0].delta else 0.0
        else:
            score = num / den
        return IrreducibilityReport(score, mode, self.spent, self.n, self.noise.beta, samples, self.j)


def _default_index(rows) -> int:
    return len(rows) - 1


def exact_irreducibility(
    backend: ExecutorBackend,
    session,
    command_index: int | None = None,
    noise: NoiseProfile | None = None,
    cache: ExecutionCache | None = None,
    noise_traces: int = DEFAULT_NOISE_TRACES,
) -> IrreducibilityReport:
    rows = as_rows(session)
    j = _default_index(rows) if command_index is None else command_index
    c = _Contrast(backend, rows, j, noise, cache, noise_traces)
    if c.n == 0:
        return c.report([], "exact")
    return c.report(list(range((1 << c.n) - 1)), "exact")


def estimate_irreducibility(
    backend: ExecutorBackend,
    session,
    command_index: int | None = None,
    budget: int = 64,
    seed=None,
    noise: NoiseProfile | None = None,
    cache: ExecutionCache | None = None,
    noise_traces: int = DEFAULT_NOISE_TRACES,
) -> IrreducibilityReport:
    rows = as_rows(session)
    j = _default_index(rows) if command_index is None else command_index
    c = _Contrast(backend, rows, j, noise, cache, noise_traces)
    if c.n == 0:
        return c.report([], "exact")
    rng = np.random.default_rng(seed)
    masks, exact = sample_subsets(c.n, budget, rng)
    while not exact and not any(masks):
        masks, exact = sample_subsets(c.n, budget, rng)
    return c.report(masks, "exact" if exact else "estimated")


@dataclass
class CompositeReport:
    commands: list[IrreducibilityReport]
    score: float
    budget_used: int

    def to_dict(self) -> dict:
        return {
            "score": self.score,
            "budget_used": self.budget_used,
            "commands": [r.to_dict() for r in self.commands],
        }


def weighted_summary(reports: Sequence[IrreducibilityReport]) -> float:
    total = sum(r.n_args for r in reports)
    if not reports:
        return 1.0
    if total == 0:
        return sum(r.score for r in reports) / len(reports)
    return sum(r.score * r.n_args for r in reports) / total


def composite_irreducibility(
    backend: ExecutorBackend,
    session,
    budget: int = 64,
    seed=None,
    cache: ExecutionCache | None = None,
    noise_traces: int = DEFAULT_NOISE_TRACES,
    first_command: int = 1,
) -> CompositeReport:
    """Score every command row after the preamble with earlier rows held fixed.

    ``first_command`` is the index of the first row to score (rows before it,
    normally just the ``cd`` preamble, are never ablated).
    """
    rows = as_rows(session)
    cache = cache if cache is not None else ExecutionCache()
    reports = [
        estimate_irreducibility(backend, rows, j, budget, seed, cache=cache, noise_traces=noise_traces)
        for j in range(first_command, len(rows))
    ]
    return CompositeReport(reports, weighted_summary(reports), sum(r.budget_used for r in reports))


@dataclass
class BudgetStudy:
    """Absolute errors of budgeted estimates against the exact score."""

    errors: dict[tuple[int, int], list[float]]
    exact_scores: list[float]
    seed: int = 0

    def rows(self, resamples: int = 1000) -> list[dict]:
        rng = np.random.default_rng(self.seed)
        out = []
        for (n, m), errs in sorted(self.errors.items()):
            lo, hi = bootstrap_ci(errs, rng, resamples)
            out.append({"n_args": n, "budget": m, "mae": float(np.mean(errs)), "ci_lo": lo, "ci_hi": hi})
        return out

    def overall(self, budget: int) -> float:
        errs = [e for (n, m), v in self.errors.items() if m == budget for e in v]
        return float(np.mean(errs))

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["n_args", "budget", "mae", "ci_lo", "ci_hi"])
            w.writeheader()
            for row in self.rows():
                w.writerow(row)


def bootstrap_ci(values: Sequence[float], rng: np.random.Generator, resamples: int = 1000) -> tuple[float, float]:
    """Percentile 95% interval for the mean."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return float("nan"), float("nan")
    if np.all(arr == arr[0]):
        return float(arr[0]), float(arr[0])
    idx = rng.integers(0, arr.size, size=(resamples, arr.size))
    means = arr[idx].mean(axis=1)
    return float(np.percentile(means, 2.5)), float(np.percentile(means, 97.5))


def mae_by_budget(
    backend: ExecutorBackend,
    inputs: Iterable,
    budgets: Sequence[int],
    seeds: Sequence[int],
    cache: ExecutionCache | None = None,
    noise_traces: int = DEFAULT_NOISE_TRACES,
    max_args: int = 12,
) -> BudgetStudy:
    """Compare budgeted estimates with the exact score for each input.

    The last row of each input is the one scored. Inputs with more than
    ``max_args`` arguments are rejected since the exact oracle would be too
    expensive.
    """
    errors: dict[tuple[int, int], list[float]] = defaultdict(list)
    exact_scores = []
    for inp in inputs:
        rows = as_rows(inp)
        j = _default_index(rows)
        local = cache if cache is not None else ExecutionCache()
        c = _Contrast(backend, rows, j, None, local, noise_traces)
        if c.n > max_args:
            raise ValueError(f"input has {c.n} arguments; exact oracle capped at {max_args}")
        exact = c.report(list(range((1 << c.n) - 1)), "exact").score if c.n else 1.0
        exact_scores.append(exact)
        for m in budgets:
            for s in seeds:
                est = estimate_irreducibility(backend, rows, j, m, s, noise=c.noise, cache=local)
                errors[(c.n, m)].append(abs(est.score - exact))
    return BudgetStudy(dict(errors), exact_scores)
