"""Command-line entry point: synth, eval-budget, stats, validate-grammar.

Exit codes: 0 success, 1 configuration error, 2 runtime error. Data goes to
files or stdout; human-readable summaries go to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import random
import sys
from pathlib import Path

from .campaign import CampaignConfig, run_campaign
from .dataset import RecordError, compare_by_length, corpus_stats, read_records
from .env import ShellEnvError
from .executor.base import ExecutorError
from .executor.sandbox import SandboxBackend
from .executor.simulated import SimulatedBackend
from .grammar import GrammarError, bundled_grammar_path, load_grammar
from .irreducibility import mae_by_budget
from .synthesis import MODES, SynthesisError, synthesize_fixed_length

SANDBOX_ENV = "SHELLSYNTH_SANDBOX_ROOT"
EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2
EXACT_ARG_CAP = 12

log = logging.getLogger("shellsynth")


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _score_filter(values):
    if values is None:
        return None
    lo, hi = values
    if not (0.0 <= lo <= hi <= 1.0):
        raise ConfigError(f"--score-filter must satisfy 0 <= lo <= hi <= 1, got {lo} {hi}")
    return (lo, hi)


def _positive(name, value):
    if value < 1:
        raise ConfigError(f"{name} must be positive, got {value}")
    return value


def _load_grammar(path):
    p = Path(path) if path else bundled_grammar_path()
    if not p.is_file():
        raise ConfigError(f"grammar file not found: {p}")
    return load_grammar(p)


def _backend_factory(args):
    if args.backend == "sim":
        return SimulatedBackend
    root = args.sandbox_root or os.environ.get(SANDBOX_ENV)
    if not root:
        raise ConfigError(f"--backend sandbox needs --sandbox-root or ${SANDBOX_ENV}")
    if not Path(root).is_dir():
        raise ConfigError(f"sandbox root not found: {root}")
    return lambda: SandboxBackend(root, timeout=args.timeout)


def _default_start_dirs(args):
    if args.start_dir:
        return list(args.start_dir)
    # the sandbox runs inside a copy of its seed tree, so stay relative to it
    return ["/home/ubuntu"] if args.backend == "sim" else ["."]


def _add_backend_flags(p):
    p.add_argument("--backend", choices=("sim", "sandbox"), default="sim")
    p.add_argument("--sandbox-root", help=f"seed tree for the sandbox backend (or ${SANDBOX_ENV})")
    p.add_argument("--timeout", type=float, default=5.0, help="sandbox per-input timeout in seconds")


def cmd_synth(args) -> int:
    grammar = _load_grammar(args.grammar)
    cfg = CampaignConfig(
        grammar_path=str(args.grammar or bundled_grammar_path()),
        mode=args.mode,
        sample_count=_positive("--samples", args.samples),
        subset_budget=_positive("--budget", args.budget),
        max_args=args.max_args,
        max_commands=args.max_commands,
        backend=args.backend,
        seed=args.seed,
        out_dir=args.out,
        score_filter=_score_filter(args.score_filter),
        noise_traces=args.noise_traces,
        start_dirs=_default_start_dirs(args),
        workers=args.workers,
        shard_size=args.shard_size,
    )
    try:
        cfg.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    factory = _backend_factory(args)
    result = run_campaign(grammar, cfg, factory)
    summary = result.summary()
    print(
        f"synth: {summary['count']} records, mean irreducibility {summary['mean_score']:.4f}, "
        f"{summary['executions']} executions -> {args.out}",
        file=sys.stderr,
    )
    return EXIT_OK


def budget_inputs(grammar, n_inputs, min_args, max_args, seed, mode="gcs"):
    """Single-command inputs with argument counts uniform in [min_args, max_args]."""
    rng = random.Random(seed)
    inputs = []
    for _ in range(n_inputs):
        cmd = rng.choice(grammar.commands)
        n = rng.randint(min_args, max_args)
        inputs.append([["cd", "/home/ubuntu"], synthesize_fixed_length(grammar, cmd, n, rng, mode)])
    return inputs


def cmd_eval_budget(args) -> int:
    grammar = _load_grammar(args.grammar)
    try:
        budgets = [_positive("budget", int(b)) for b in args.budgets.split(",") if b.strip()]
    except ValueError as exc:
        raise ConfigError(f"--budgets must be comma-separated integers, got {args.budgets!r}") from exc
    if not budgets:
        raise ConfigError("--budgets is empty")
    if not (1 <= args.min_args <= args.max_args <= EXACT_ARG_CAP):
        raise ConfigError(f"argument counts must satisfy 1 <= min <= max <= {EXACT_ARG_CAP}")
    _positive("--inputs", args.inputs)
    _positive("--seeds", args.seeds)
    if args.backend != "sim":
        raise ConfigError("eval-budget needs the exact oracle, which is only run on --backend sim")
    backend = SimulatedBackend()
    inputs = budget_inputs(grammar, args.inputs, args.min_args, args.max_args, args.seed, args.mode)
    study = mae_by_budget(backend, inputs, budgets, seeds=range(args.seeds), noise_traces=args.noise_traces)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        study.write_csv(args.out)
    else:
        w = csv.DictWriter(sys.stdout, fieldnames=["n_args", "budget", "mae", "ci_lo", "ci_hi"])
        w.writeheader()
        w.writerows(study.rows())
    for m in budgets:
        print(f"eval-budget: M={m} MAE={study.overall(m):.4f}", file=sys.stderr)
    return EXIT_OK


def cmd_stats(args) -> int:
    flt = _score_filter(args.score_filter)
    stats = corpus_stats(read_records(args.shards), flt, label=args.label)
    other = None
    if args.compare:
        other = corpus_stats(read_records(args.compare), flt, label=args.compare_label)
    if args.out:
        stats.write(args.out, "stats")
        if other is not None:
            other.write(args.out, "stats_compare")
            table = compare_by_length(stats, other)
            with open(Path(args.out) / "comparison.json", "w") as fh:
                json.dump(table, fh, indent=2)
    else:
        payload = stats.to_dict()
        if other is not None:
            payload = {"a": payload, "b": other.to_dict(), "comparison": compare_by_length(stats, other)}
        json.dump(payload, sys.stdout, indent=2)
        sys.stdout.write("\n")
    print(f"stats: {stats.count} records, mean {stats.mean:.4f}", file=sys.stderr)
    return EXIT_OK


def cmd_validate_grammar(args) -> int:
    path = Path(args.grammar) if args.grammar else bundled_grammar_path()
    if not path.is_file():
        raise ConfigError(f"grammar file not found: {path}")
    g = load_grammar(path)
    info = {
        "path": str(path),
        "commands": g.commands,
        "nonterminals": len(g.nonterminals),
        "terminals": len(g.terminals),
        "productions": len(g.productions),
        "redirect": g.redirect_target,
    }
    json.dump(info, sys.stdout, indent=2)
    sys.stdout.write("\n")
    print(f"validate-grammar: {path} OK ({len(g.productions)} productions)", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="shellsynth", description="Grammar-driven shell input synthesis and scoring.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="run a synthesis campaign and write NDJSON shards")
    p.add_argument("--grammar", help="grammar file (default: bundled toy grammar)")
    p.add_argument("--mode", choices=MODES, default="gcs")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--budget", type=int, default=64, help="subsets per command (M)")
    p.add_argument("--max-args", type=int, default=12, help="columns per row, command included")
    p.add_argument("--max-commands", type=int, default=2, help="rows per session, preamble included")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory for shards")
    p.add_argument("--score-filter", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--noise-traces", type=int, default=3)
    p.add_argument("--start-dir", action="append", help="candidate starting directory (repeatable)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--shard-size", type=int, default=1000)
    _add_backend_flags(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval-budget", help="MAE of budgeted estimates against the exact oracle")
    p.add_argument("--grammar")
    p.add_argument("--mode", choices=MODES, default="gcs")
    p.add_argument("--budgets", default="8,16,32,64")
    p.add_argument("--inputs", type=int, default=200)
    p.add_argument("--seeds", type=int, default=5, help="estimates per input and budget")
    p.add_argument("--min-args", type=int, default=8)
    p.add_argument("--max-args", type=int, default=12)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise-traces", type=int, default=3)
    p.add_argument("--out", help="CSV path (default: stdout)")
    _add_backend_flags(p)
    p.set_defaults(func=cmd_eval_budget)

    p = sub.add_parser("stats", help="corpus statistics from NDJSON shards")
    p.add_argument("shards", nargs="+", help="shard files, globs, or directories")
    p.add_argument("--score-filter", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--label")
    p.add_argument("--compare", nargs="+", help="second corpus for a by-length comparison")
    p.add_argument("--compare-label")
    p.add_argument("--out", help="output directory (default: JSON on stdout)")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("validate-grammar", help="parse and check a grammar file")
    p.add_argument("grammar", nargs="?")
    p.set_defaults(func=cmd_validate_grammar)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
    try:
        return args.func(args)
    except (ConfigError, GrammarError) as exc:
        print(f"shellsynth: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ExecutorError, ShellEnvError, SynthesisError, RecordError, OSError) as exc:
        print(f"shellsynth: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
