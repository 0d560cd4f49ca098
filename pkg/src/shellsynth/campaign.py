"""Synthesis campaigns: drive the environment with the grammar sampler."""

from __future__ import annotations

import json
import logging
import random
import statistics
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .dataset import OnlineStats, ShioRecord, write_records
from .env import Action, EnvConfig, ShellEnv
from .executor.base import ExecutionCache, ExecutorBackend
from .grammar import Grammar
from .render import SEPARATOR
from .synthesis import MODES, iter_command_arguments

log = logging.getLogger(__name__)

JOINERS = ("&&", "||", "|", SEPARATOR)
REDIRECT = ">"


@dataclass
class CampaignConfig:
    grammar_path: str | None = None
    mode: str = "gcs"
    sample_count: int = 100
    subset_budget: int = 64
    max_args: int = 12
    max_commands: int = 2
    backend: str = "sim"
    seed: int = 0
    out_dir: str | None = None
    score_filter: tuple[float, float] | None = None
    noise_traces: int = 3
    start_dirs: list[str] = field(default_factory=lambda: ["/home/ubuntu"])
    workers: int = 1
    shard_size: int = 1000
    max_attempts_factor: int = 100

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        for name in ("sample_count", "subset_budget", "max_args", "max_commands", "workers", "shard_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.max_args < 2:
            raise ValueError("max_args must be >= 2")
        if self.noise_traces < 2:
            raise ValueError("noise_traces must be >= 2")
        if self.score_filter is not None:
            lo, hi = self.score_filter
            if not (0.0 <= lo <= hi <= 1.0):
                raise ValueError(f"score filter must lie within [0, 1], got {list(self.score_filter)}")
        if self.backend not in ("sim", "sandbox"):
            raise ValueError(f"unknown backend {self.backend!r}")

    def env_config(self) -> EnvConfig:
        return EnvConfig(
            max_commands=self.max_commands,
            max_args=self.max_args,
            start_dirs=list(self.start_dirs),
            subset_budget=self.subset_budget,
            noise_traces=self.noise_traces,
        )


def session_seed(seed: int, session_id: int) -> int:
    """Independent per-session seed, stable under any scheduling."""
    return int(np.random.SeedSequence([seed, session_id]).generate_state(1, dtype=np.uint64)[0])


def plan_session(grammar: Grammar, cfg: CampaignConfig, rng: random.Random) -> list[list[str]]:
    """Command rows (after the preamble) for one session.

    The first row is a command; each further row is joined by a connector, a
    plain ``;``, or (if the grammar names one) a ``>`` redirect target.
    """
    n_rows = rng.randint(1, cfg.max_commands - 1) if cfg.max_commands > 1 else 0
    rows: list[list[str]] = []
    for i in range(n_rows):
        joiner = SEPARATOR
        if i > 0:
            choices = list(JOINERS)
            if grammar.redirect_target and rows[-1][0] != REDIRECT:
                choices.append(REDIRECT)
            joiner = rng.choice(choices)
        if joiner == REDIRECT:
            target = next(iter_command_arguments(grammar, grammar.redirect_target, rng, cfg.mode, 1), None)
            rows.append([REDIRECT, target or "out.txt"])
            continue
        head = [] if joiner == SEPARATOR else [joiner]
        cmd = rng.choice(grammar.commands)
        room = cfg.max_args - len(head) - 1
        args = list(iter_command_arguments(grammar, grammar.start_for(cmd), rng, cfg.mode, room))
        rows.append(head + [cmd] + args)
    return rows


def run_session(env: ShellEnv, grammar: Grammar, cfg: CampaignConfig, session_id: int) -> ShioRecord:
    seed = session_seed(cfg.seed, session_id)
    rng = random.Random(seed)
    env.reset(seed=seed)
    for row in plan_session(grammar, cfg, rng):
        res = env.step(Action(row[0], False, True))
        for tok in row[1:]:
            res = env.step(Action(tok, False, False))
        if res.done:
            raise RuntimeError(f"session {session_id} hit the horizon before execution")
    res = env.step(Action("", True, False))
    record = res.info["record"]
    record.session_id = session_id
    return record


@dataclass
class CampaignResult:
    records: list[ShioRecord]
    attempted: int
    executions: int
    shards: list[Path] = field(default_factory=list)

    @property
    def mean_score(self) -> float:
        return statistics.fmean(r.irreducibility for r in self.records) if self.records else float("nan")

    def summary(self) -> dict:
        online = OnlineStats()
        for r in self.records:
            online.add(r)
        return {
            "count": len(self.records),
            "attempted": self.attempted,
            "mean_score": self.mean_score,
            "executions": self.executions,
            "mean_by_length": {str(k): v for k, v in online.means().items()},
            "shards": [p.name for p in self.shards],
        }


def run_campaign(
    grammar: Grammar,
    cfg: CampaignConfig,
    backend_factory: Callable[[], ExecutorBackend],
    progress: Callable[[int], None] | None = None,
) -> CampaignResult:
    """Run sessions in id order until ``sample_count`` records pass the filter.

    Each worker thread owns its own backend and environment; the execution
    cache is shared. Output order is by session id whatever the completion
    order.
    """
    cfg.validate()
    cache = ExecutionCache()
    local = threading.local()
    backends: list[ExecutorBackend] = []
    lock = threading.Lock()

    def work(session_id: int) -> ShioRecord:
        env = getattr(local, "env", None)
        if env is None:
            backend = backend_factory()
            with lock:
                backends.append(backend)
            env = local.env = ShellEnv(backend, cfg.env_config(), cache)
        return run_session(env, grammar, cfg, session_id)

    def keep(r: ShioRecord) -> bool:
        if cfg.score_filter is None:
            return True
        lo, hi = cfg.score_filter
        return lo <= r.irreducibility <= hi

    records: list[ShioRecord] = []
    max_attempts = cfg.sample_count * (cfg.max_attempts_factor if cfg.score_filter else 1)
    attempted = 0
    chunk = max(1, cfg.workers * 8)
    try:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            while len(records) < cfg.sample_count and attempted < max_attempts:
                ids = range(attempted, min(attempted + chunk, max_attempts))
                for r in pool.map(work, ids):
                    attempted += 1
                    if keep(r) and len(records) < cfg.sample_count:
                        records.append(r)
                if progress:
                    progress(len(records))
        executions = sum(b.executions for b in backends)
    finally:
        for b in backends:
            b.close()
    if len(records) < cfg.sample_count:
        log.warning("only %d of %d sessions passed the score filter", len(records), cfg.sample_count)
    result = CampaignResult(records, attempted, executions)
    if cfg.out_dir is not None:
        result.shards = write_records(records, cfg.out_dir, cfg.shard_size)
        manifest = {"config": _config_dict(cfg), **result.summary()}
        Path(cfg.out_dir, "campaign.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return result


def _config_dict(cfg: CampaignConfig) -> dict:
    d = asdict(cfg)
    if d["score_filter"] is not None:
        d["score_filter"] = list(d["score_filter"])
    return d

