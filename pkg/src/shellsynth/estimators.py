"""scikit-learn style wrappers around synthesis and irreducibility scoring.

``X`` is a sequence of inputs; each input is a flat argument list such as
``["echo", "-n", "hi"]`` or a list of command rows whose first row is the
``cd`` preamble.
"""

from __future__ import annotations

import random
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .executor.base import ExecutionCache
from .executor.simulated import SimulatedBackend
from .grammar import Grammar, load_bundled_grammar, load_grammar
from .irreducibility import as_rows, estimate_irreducibility, exact_irreducibility
from .render import MAX_TOKEN_LEN, visible_length
from .synthesis import MODES, synthesize_command


def check_inputs(X) -> list[list[list[str]]]:
    """Validate and normalize inputs to lists of rows."""
    if isinstance(X, (str, bytes)):
        raise TypeError("X must be a sequence of inputs, not a single string")
    try:
        items = list(X)
    except TypeError as exc:
        raise TypeError("X must be iterable") from exc
    if not items:
        raise ValueError("X is empty")
    out = []
    for i, item in enumerate(items):
        if isinstance(item, str) or not isinstance(item, (list, tuple)) or not item:
            raise TypeError(f"input {i} must be a non-empty list of tokens or rows")
        rows = as_rows(item)
        for row in rows:
            if not row or not all(isinstance(t, str) for t in row):
                raise TypeError(f"input {i} has a malformed row {row!r}")
            for tok in row:
                if visible_length(tok) > MAX_TOKEN_LEN:
                    raise ValueError(f"input {i} has a token over {MAX_TOKEN_LEN} characters")
        out.append(rows)
    return out


class IrreducibilityEstimator(BaseEstimator, TransformerMixin):
    """Scores the last command row of each input.

    ``budget`` is the subset count M; with ``exact=True`` every proper subset
    is enumerated instead.
    """

    def __init__(self, budget=64, noise_traces=3, exact=False, random_state=None, backend=None):
        self.budget = budget
        self.noise_traces = noise_traces
        self.exact = exact
        self.random_state = random_state
        self.backend = backend

    def fit(self, X=None, y=None):
        if self.budget < 1:
            raise ValueError("budget must be positive")
        if self.noise_traces < 2:
            raise ValueError("noise_traces must be >= 2")
        self.backend_ = self.backend if self.backend is not None else SimulatedBackend()
        self.cache_ = ExecutionCache()
        return self

    def _report(self, rows, i):
        if self.exact:
            return exact_irreducibility(self.backend_, rows, cache=self.cache_, noise_traces=self.noise_traces)
        seed = None if self.random_state is None else [self.random_state, i]
        return estimate_irreducibility(
            self.backend_, rows, budget=self.budget, seed=seed, cache=self.cache_, noise_traces=self.noise_traces
        )

    def reports(self, X):
        check_is_fitted(self, "backend_")
        return [self._report(rows, i) for i, rows in enumerate(check_inputs(X))]

    def score_samples(self, X) -> np.ndarray:
        return np.array([r.score for r in self.reports(X)], dtype=float)

    def transform(self, X) -> np.ndarray:
        return self.score_samples(X).reshape(-1, 1)


class GrammarSynthesizer(BaseEstimator):
    """Samples commands from a grammar in gcs or ucs mode."""

    def __init__(self, grammar=None, mode="gcs", max_args=11, random_state=None):
        self.grammar = grammar
        self.mode = mode
        self.max_args = max_args
        self.random_state = random_state

    def fit(self, X=None, y=None):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.max_args < 0:
            raise ValueError("max_args must be non-negative")
        g = self.grammar
        if g is None:
            g = load_bundled_grammar()
        elif not isinstance(g, Grammar):
            g = load_grammar(g)
        self.grammar_ = g
        self.rng_ = random.Random(self.random_state)
        return self

    def sample(self, n: int = 1, commands: Sequence[str] | None = None) -> list[list[str]]:
        check_is_fitted(self, "grammar_")
        pool = list(commands) if commands else self.grammar_.commands
        out = []
        for _ in range(n):
            cmd = self.rng_.choice(pool)
            out.append(synthesize_command(self.grammar_, cmd, self.rng_, self.mode, self.max_args))
        return out
