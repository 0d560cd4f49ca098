"""NDJSON corpus records: writing shards, validated reading, and statistics."""

from __future__ import annotations

import csv
import glob as globlib
import json
import math
import os
import statistics
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator, Sequence

from . import patch as patchlib
from .render import command_parts, split_rows

FIELDS = ("session_id", "input", "input_args", "exit_code", "output", "context_patch", "irreducibility")
EXTENSION_FIELDS = ("commands",)
SHARD_SIZE = 1000


class RecordError(ValueError):
    def __init__(self, message: str, location: str | None = None, field: str | None = None):
        self.location = location
        self.field = field
        prefix = f"{location}: " if location else ""
        super().__init__(prefix + message)


@dataclass
class ShioRecord:
    session_id: int
    input: str
    input_args: list[str]
    exit_code: int
    output: str
    context_patch: str
    irreducibility: float
    commands: list[dict] | None = None

    def to_dict(self) -> dict[str, Any]:
        d = {f: getattr(self, f) for f in FIELDS}
        if self.commands is not None:
            d["commands"] = self.commands
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any], location: str | None = None) -> "ShioRecord":
        validate_record(d, location)
        return cls(**{k: d[k] for k in FIELDS}, commands=d.get("commands"))


_TYPES = {
    "session_id": int,
    "input": str,
    "input_args": list,
    "exit_code": int,
    "output": str,
    "context_patch": str,
    "irreducibility": (int, float),
}


def validate_record(d: Any, location: str | None = None) -> None:
    if not isinstance(d, dict):
        raise RecordError("record is not a JSON object", location)
    for name in FIELDS:
        if name not in d:
            raise RecordError(f"missing field '{name}'", location, name)
        value = d[name]
        if isinstance(value, bool) or not isinstance(value, _TYPES[name]):
            raise RecordError(f"field '{name}' has wrong type {type(value).__name__}", location, name)
    unknown = set(d) - set(FIELDS) - set(EXTENSION_FIELDS)
    if unknown:
        raise RecordError(f"unknown fields {sorted(unknown)}", location, sorted(unknown)[0])
    if not all(isinstance(a, str) for a in d["input_args"]):
        raise RecordError("field 'input_args' must hold strings", location, "input_args")
    score = d["irreducibility"]
    if not (0.0 <= score <= 1.0) or math.isnan(score):
        raise RecordError(f"field 'irreducibility' out of range [0, 1]: {score}", location, "irreducibility")
    try:
        patchlib.loads(d["context_patch"])
    except (ValueError, patchlib.PatchError) as exc:
        raise RecordError(f"field 'context_patch' is not a valid patch: {exc}", location, "context_patch") from exc


def shard_name(index: int) -> str:
    return f"shard-{index:05d}.jsonl"


def encode_record(record: ShioRecord | dict) -> str:
    d = record.to_dict() if isinstance(record, ShioRecord) else {
        **{f: record[f] for f in FIELDS},
        **{f: record[f] for f in EXTENSION_FIELDS if f in record},
    }
    return json.dumps(d, ensure_ascii=False)


def write_records(records: Iterable[ShioRecord | dict], out_dir: str | os.PathLike, shard_size: int = SHARD_SIZE) -> list[Path]:
    """Write records into ``shard-NNNNN.jsonl`` files of ``shard_size`` lines.

    All records are checked for duplicate ids before anything is written.
    """
    if shard_size < 1:
        raise ValueError("shard_size must be positive")
    records = list(records)
    seen: set[int] = set()
    for i, r in enumerate(records):
        d = r.to_dict() if isinstance(r, ShioRecord) else r
        validate_record(d, f"record {i}")
        if d["session_id"] in seen:
            raise RecordError(f"duplicate session_id {d['session_id']}", f"record {i}", "session_id")
        seen.add(d["session_id"])
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for start in range(0, len(records), shard_size):
        path = out / shard_name(start // shard_size)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for r in records[start : start + shard_size]:
                fh.write(encode_record(r) + "\n")
        paths.append(path)
    return paths


def _expand(paths: str | os.PathLike | Sequence[str | os.PathLike]) -> list[str]:
    if isinstance(paths, (str, os.PathLike)):
        p = os.fspath(paths)
        if os.path.isdir(p):
            return sorted(globlib.glob(os.path.join(p, "shard-*.jsonl")))
        matches = sorted(globlib.glob(p))
        if not matches and not globlib.has_magic(p):
            raise FileNotFoundError(f"no such file: {p}")
        return matches
    return [m for p in paths for m in _expand(p)]


def read_records(paths) -> Iterator[ShioRecord]:
    """Stream records from a glob, directory, or list of files, validating each."""
    for path in _expand(paths):
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                loc = f"{path}:{lineno}"
                try:
                    d = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise RecordError(f"invalid JSON: {exc.msg}", loc) from exc
                yield ShioRecord.from_dict(d, loc)


def record_command(record: ShioRecord) -> str:
    rows = split_rows(record.input_args)
    if not rows:
        return ""
    head, _ = command_parts(rows[0])
    return head[-1] if head else ""


def record_arg_count(record: ShioRecord) -> int:
    """Arguments across all command rows, excluding heads and separators."""
    return sum(len(command_parts(r)[1]) for r in split_rows(record.input_args))


@dataclass
class CorpusStats:
    count: int
    mean: float
    std: float
    by_length: dict[int, dict[str, float]]
    cdf: list[tuple[float, float]]
    commands: dict[str, int]
    filter: tuple[float, float] | None = None
    label: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "label": self.label,
            "filter": list(self.filter) if self.filter else None,
            "count": self.count,
            "mean": self.mean,
            "std": self.std,
            "by_length": {str(k): v for k, v in sorted(self.by_length.items())},
            "cdf": [list(p) for p in self.cdf],
            "commands": dict(sorted(self.commands.items())),
        }

    def write(self, out_dir: str | os.PathLike, stem: str = "stats") -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        js = out / f"{stem}.json"
        js.write_text(json.dumps(self.to_dict(), indent=2) + "\n")
        by_len = out / f"{stem}_by_length.csv"
        with open(by_len, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n_args", "count", "mean", "std"])
            for n, v in sorted(self.by_length.items()):
                w.writerow([n, v["count"], v["mean"], v["std"]])
        cdf = out / f"{stem}_cdf.csv"
        with open(cdf, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["score", "cdf"])
            w.writerows(self.cdf)
        return [js, by_len, cdf]


def _pstd(values: Sequence[float]) -> float:
    return statistics.pstdev(values) if len(values) > 1 else 0.0


def empirical_cdf(scores: Sequence[float]) -> list[tuple[float, float]]:
    """(score, fraction of scores <= score) at each distinct score."""
    counts = Counter(scores)
    total = len(scores)
    out, acc = [], 0
    for s in sorted(counts):
        acc += counts[s]
        out.append((s, acc / total))
    return out


def corpus_stats(
    records: Iterable[ShioRecord],
    score_range: tuple[float, float] | None = None,
    label: str | None = None,
) -> CorpusStats:
    if score_range is not None:
        lo, hi = score_range
        if not (0.0 <= lo <= hi <= 1.0):
            raise ValueError(f"score filter must lie within [0, 1], got {score_range}")
    groups: dict[int, list[float]] = defaultdict(list)
    commands: Counter[str] = Counter()
    scores = []
    for r in records:
        if score_range is not None and not (score_range[0] <= r.irreducibility <= score_range[1]):
            continue
        scores.append(r.irreducibility)
        groups[record_arg_count(r)].append(r.irreducibility)
        commands[record_command(r)] += 1
    by_length = {
        n: {"count": len(v), "mean": statistics.fmean(v), "std": _pstd(v)} for n, v in sorted(groups.items())
    }
    return CorpusStats(
        count=len(scores),
        mean=statistics.fmean(scores) if scores else float("nan"),
        std=_pstd(scores),
        by_length=by_length,
        cdf=empirical_cdf(scores),
        commands=dict(commands),
        filter=tuple(score_range) if score_range else None,
        label=label,
    )


def compare_by_length(a: CorpusStats, b: CorpusStats) -> list[dict[str, Any]]:
    """Side-by-side mean-by-length table for two corpora (e.g. gcs vs ucs)."""
    la, lb = a.label or "a", b.label or "b"
    rows = []
    for n in sorted(set(a.by_length) | set(b.by_length)):
        ra, rb = a.by_length.get(n), b.by_length.get(n)
        rows.append({
            "n_args": n,
            f"{la}_count": ra["count"] if ra else 0,
            f"{la}_mean": ra["mean"] if ra else None,
            f"{lb}_count": rb["count"] if rb else 0,
            f"{lb}_mean": rb["mean"] if rb else None,
        })
    return rows


@dataclass
class OnlineStats:
    """Running mean-by-length kept during a campaign."""

    sums: dict[int, float] = field(default_factory=lambda: defaultdict(float))
    counts: dict[int, int] = field(default_factory=lambda: defaultdict(int))

    def add(self, record: ShioRecord) -> None:
        n = record_arg_count(record)
        self.sums[n] += record.irreducibility
        self.counts[n] += 1

    def means(self) -> dict[int, float]:
        return {n: self.sums[n] / self.counts[n] for n in sorted(self.counts)}
