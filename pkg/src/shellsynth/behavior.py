"""Comparing execution behaviors.

Two traces count as the same behavior when their exit codes match, their
context patches match, and their outputs are at least ``beta`` similar. The
threshold ``beta`` comes from repeated identical executions: the mean
pairwise similarity minus two population standard deviations, capped at 0.95.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

from .executor.base import ExecutionTrace, ExecutorBackend, execute
from .patch import apply_patch, diff_context  # noqa: F401  (re-exported)

BETA_CAP = 0.95
DEFAULT_NOISE_TRACES = 3


def levenshtein(a: str, b: str) -> int:
    if a == b:
        return 0
    # common prefix/suffix never change the distance
    start = 0
    limit = min(len(a), len(b))
    while start < limit and a[start] == b[start]:
        start += 1
    end_a, end_b = len(a), len(b)
    while end_a > start and end_b > start and a[end_a - 1] == b[end_b - 1]:
        end_a -= 1
        end_b -= 1
    a, b = a[start:end_a], b[start:end_b]
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def levenshtein_within(a: str, b: str, k: int) -> int | None:
    """Edit distance if it is at most ``k``, else None (banded DP)."""
    if a == b:
        return 0
    start = 0
    limit = min(len(a), len(b))
    while start < limit and a[start] == b[start]:
        start += 1
    end_a, end_b = len(a), len(b)
    while end_a > start and end_b > start and a[end_a - 1] == b[end_b - 1]:
        end_a -= 1
        end_b -= 1
    a, b = a[start:end_a], b[start:end_b]
    n, m = len(a), len(b)
    if abs(n - m) > k:
        return None
    if not n or not m:
        return max(n, m)
    big = k + 1
    # cells more than k off the diagonal can never be within budget
    prev = [j if j <= k else big for j in range(m + 1)]
    for i in range(1, n + 1):
        lo, hi = max(1, i - k), min(m, i + k)
        cur = [big] * (m + 1)
        if i <= k:
            cur[0] = i
        ca = a[i - 1]
        best = cur[lo - 1]
        for j in range(lo, hi + 1):
            v = prev[j - 1] + (ca != b[j - 1])
            x = prev[j] + 1
            if x < v:
                v = x
            x = cur[j - 1] + 1
            if x < v:
                v = x
            if v > big:
                v = big
            cur[j] = v
            if v < best:
                best = v
        if best > k:
            return None
        prev = cur
    return prev[m] if prev[m] <= k else None


def max_edits(length: int, beta: float) -> int:
    """Largest distance ``d`` with ``1 - d / length >= beta``, or -1 if none."""
    if length == 0:
        return 0 if beta <= 1.0 else -1
    d = min(length, max(0, int((1.0 - beta) * length)))
    while d < length and 1.0 - (d + 1) / length >= beta:
        d += 1
    while d >= 0 and 1.0 - d / length < beta:
        d -= 1
    return d


def similar_enough(a: str, b: str, beta: float) -> bool:
    """Same as ``edit_similarity(a, b) >= beta`` without the full DP."""
    if a == b:
        return 1.0 >= beta
    k = max_edits(max(len(a), len(b), 1), beta)
    if k < 0:
        return False
    return levenshtein_within(a, b, k) is not None


def edit_similarity(a: str, b: str) -> float:
    """``1 - levenshtein(a, b) / max(len(a), len(b), 1)`` over characters."""
    if a == b:
        return 1.0
    return 1.0 - levenshtein(a, b) / max(len(a), len(b), 1)


@dataclass(frozen=True)
class NoiseProfile:
    beta: float
    pairwise_sims: tuple[float, ...]
    trace_count: int

    @classmethod
    def from_similarities(cls, sims: Sequence[float], trace_count: int | None = None) -> "NoiseProfile":
        sims = tuple(float(s) for s in sims)
        if not sims:
            raise ValueError("need at least one pairwise similarity")
        mu = statistics.fmean(sims)
        sigma = statistics.pstdev(sims)
        if trace_count is None:
            # invert n*(n-1)/2 == len(sims)
            trace_count = int(round((1 + (1 + 8 * len(sims)) ** 0.5) / 2))
        return cls(min(BETA_CAP, mu - 2 * sigma), sims, trace_count)

    @classmethod
    def deterministic(cls) -> "NoiseProfile":
        return cls.from_similarities([1.0, 1.0, 1.0], 3)


def noise_threshold(backend: ExecutorBackend, command: str, trace_count: int = DEFAULT_NOISE_TRACES) -> NoiseProfile:
    """Execute ``command`` ``trace_count`` times and derive its threshold."""
    if trace_count < 2:
        raise ValueError("noise estimation needs at least two traces")
    outputs = [execute(backend, command).output for _ in range(trace_count)]
    sims = [edit_similarity(x, y) for x, y in combinations(outputs, 2)]
    return NoiseProfile.from_similarities(sims, trace_count)


def behaviors_differ(full: ExecutionTrace, sub: ExecutionTrace, noise: NoiseProfile) -> bool:
    if full.exit_code != sub.exit_code:
        return True
    if full.patch != sub.patch:
        return True
    return not similar_enough(full.output, sub.output, noise.beta)
