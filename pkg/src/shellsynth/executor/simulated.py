"""Deterministic simulated shell over a virtual filesystem.

The command table is fixed: ``cd echo true false export unset touch rm mkdir
cat ls pwd df`` plus network stubs, joined with ``;``, ``&&``, ``||``, ``|`` and
the ``>``/``>>`` redirections. ``echo -q`` is accepted and does nothing; it
exists so tests can plant an argument with no behavioral effect.
"""

from __future__ import annotations

import hashlib
import json
import posixpath
import re
import shlex
from dataclasses import dataclass, replace
from functools import lru_cache
from pathlib import Path
from typing import Callable

from .base import ContextSnapshot, ExecutorBackend, ExecutorError, RunResult

DEFAULT_MANIFEST = Path(__file__).resolve().parent.parent / "data" / "simfs.json"
OPERATORS = (";", "&&", "||", "|", ">", ">>")
NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
VAR_RE = re.compile(r"\$(?:\{([A-Za-z_][A-Za-z0-9_]*)\}|([A-Za-z_][A-Za-z0-9_]*))")
MAX_COMMANDS = 1000
MAX_OUTPUT = 1 << 16


@dataclass(frozen=True)
class Node:
    kind: str  # "file" | "dir"
    owner: str
    group: str
    perms: str
    content: str = ""

    def record(self) -> dict:
        size = len(self.content.encode("utf-8")) if self.kind == "file" else 4096
        return {
            "group": self.group,
            "hash": _digest(self.content) if self.kind == "file" else "",
            "kind": self.kind,
            "owner": self.owner,
            "perms": self.perms,
            "size": size,
        }


@lru_cache(maxsize=4096)
def _digest(content: str) -> str:
    return hashlib.sha256(content.encode("utf-8")).hexdigest()[:16]


@dataclass
class SimState:
    cwd: str
    env: dict[str, str]
    fs: dict[str, Node]
    groups: list[str]
    shell_opts: dict
    limits: dict
    firewall: list
    user: str

    def copy(self) -> "SimState":
        return replace(self, env=dict(self.env), fs=dict(self.fs))

    def snapshot(self) -> ContextSnapshot:
        return ContextSnapshot(
            cwd=self.cwd,
            env=dict(self.env),
            fs={p: n.record() for p, n in self.fs.items()},
            groups=list(self.groups),
            shell_opts=dict(self.shell_opts),
            limits=dict(self.limits),
            firewall=list(self.firewall),
        )


def load_manifest(path: str | Path = DEFAULT_MANIFEST) -> SimState:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    user = data.get("user", "root")
    fs = {}
    for p, spec in data["fs"].items():
        kind = spec["kind"]
        default_perms = "drwxrwxr-x" if kind == "dir" else "-rw-rw-r--"
        fs[posixpath.normpath(p)] = Node(
            kind=kind,
            owner=spec.get("owner", user),
            group=spec.get("group", user),
            perms=spec.get("perms", default_perms),
            content=spec.get("content", ""),
        )
    return SimState(
        cwd=data.get("cwd", "/"),
        env=dict(data.get("env", {})),
        fs=fs,
        groups=list(data.get("groups", [])),
        shell_opts=dict(data.get("shell_opts", {})),
        limits=dict(data.get("limits", {})),
        firewall=list(data.get("firewall", [])),
        user=user,
    )


class ShellSyntaxError(Exception):
    pass


@dataclass
class Simple:
    words: list[str]
    redirects: list[tuple[str, str]]


def parse(text: str) -> list[tuple[str, list[Simple]]]:
    """Split input into ``(joiner, pipeline)`` pairs; the first joiner is ``;``."""
    lex = shlex.shlex(text, posix=True, punctuation_chars=";&|<>")
    lex.whitespace_split = True
    try:
        tokens = list(lex)
    except ValueError as exc:
        raise ShellSyntaxError(str(exc)) from None
    result: list[tuple[str, list[Simple]]] = []
    joiner = ";"
    pipeline: list[Simple] = []
    cur = Simple([], [])
    expect_target: str | None = None

    def close_simple(op: str) -> None:
        if not cur.words and not cur.redirects:
            raise ShellSyntaxError(f'"{op}" unexpected')

    for tok in tokens:
        if expect_target is not None:
            if tok in OPERATORS or set(tok) <= set(";&|<>"):
                raise ShellSyntaxError(f'"{tok}" unexpected')
            cur.redirects.append((expect_target, tok))
            expect_target = None
        elif tok in (">", ">>"):
            expect_target = tok
        elif tok == "|":
            close_simple(tok)
            pipeline.append(cur)
            cur = Simple([], [])
        elif tok in (";", "&&", "||"):
            close_simple(tok)
            pipeline.append(cur)
            result.append((joiner, pipeline))
            joiner, pipeline, cur = tok, [], Simple([], [])
        elif set(tok) <= set(";&|<>"):
            raise ShellSyntaxError(f'"{tok}" unexpected')
        else:
            cur.words.append(tok)
    if expect_target is not None:
        raise ShellSyntaxError("newline unexpected")
    if cur.words or cur.redirects:
        pipeline.append(cur)
    elif pipeline or joiner in ("&&", "||"):
        raise ShellSyntaxError("end of file unexpected")
    if pipeline:
        result.append((joiner, pipeline))
    return result


def _short_flags(args: list[str], allowed: str) -> tuple[set[str], list[str], str | None]:
    """GNU-style option scan: ``-xyz`` clusters anywhere before ``--``.

    Returns (flags, operands, bad) where ``bad`` is the first unknown short
    letter, or the whole token for an unknown ``--long`` option.
    """
    flags: set[str] = set()
    ops: list[str] = []
    it = iter(args)
    for tok in it:
        if tok == "--":
            ops.extend(it)
            break
        if tok == "-" or not tok.startswith("-"):
            ops.append(tok)
        elif tok.startswith("--"):
            return flags, ops, tok
        else:
            for ch in tok[1:]:
                if ch not in allowed:
                    return flags, ops, ch
                flags.add(ch)
    return flags, ops, None


DF_FIELDS = ("source", "fstype", "size", "used", "avail", "pcent", "target")
# (source, fstype, size, used, avail, target) in bytes
DF_MOUNTS = (
    ("/dev/sda1", "ext4", 31_526_391_808, 12_348_030_976, 19_161_583_616, "/"),
    ("proc", "proc", 0, 0, 0, "/proc"),
    ("tmpfs", "tmpfs", 2_067_398_656, 0, 2_067_398_656, "/dev/shm"),
    ("tmpfs", "tmpfs", 413_478_912, 1_138_688, 412_340_224, "/run"),
)


def _human(n: int) -> str:
    if n < 1024:
        return str(n)
    for suffix in "KMGT":
        n /= 1024
        if n < 1024 or suffix == "T":
            return f"{n:.1f}{suffix}" if n < 10 else f"{n:.0f}{suffix}"
    return str(n)


def _block_header(unit: int, spec: str | None) -> str:
    if spec is None:
        return "1K-blocks"
    for suffix, size in (("G", 1024**3), ("M", 1024**2), ("K", 1024)):
        if unit % size == 0:
            return f"{unit // size}{suffix}-blocks" if unit // size != 1 else f"1{suffix}-blocks"
    return f"{unit}B-blocks"


class SimShell:
    def __init__(self, state: SimState):
        self.st = state
        self.out: list[str] = []
        self.count = 0
        self.table: dict[str, Callable[[list[str], str], tuple[str, int]]] = {
            "cd": self.cd, "echo": self.echo, "true": self.true, "false": self.false,
            "export": self.export, "unset": self.unset, "touch": self.touch,
            "rm": self.rm, "mkdir": self.mkdir, "cat": self.cat, "ls": self.ls,
            "pwd": self.pwd, "df": self.df, "ping": self.ping, "curl": self.curl, "wget": self.wget,
        }

    # -- plumbing ---------------------------------------------------------
    def err(self, msg: str) -> None:
        self.out.append(msg + "\n")

    def path(self, p: str) -> str:
        if not p.startswith("/"):
            p = posixpath.join(self.st.cwd, p)
        p = posixpath.normpath(p)
        return "/" + p.lstrip("/") if p.startswith("//") else p

    def node(self, p: str) -> Node | None:
        return self.st.fs.get(self.path(p))

    def new_node(self, kind: str, content: str = "") -> Node:
        perms = "drwxrwxr-x" if kind == "dir" else "-rw-rw-r--"
        return Node(kind, self.st.user, self.st.user, perms, content)

    def expand(self, word: str) -> str:
        return VAR_RE.sub(lambda m: self.st.env.get(m.group(1) or m.group(2), ""), word)

    def run(self, text: str) -> tuple[str, int]:
        try:
            program = parse(text)
        except ShellSyntaxError as exc:
            self.err(f"bash: line 1: syntax error: {exc}")
            return self.output(), 2
        status = 0
        for joiner, pipeline in program:
            if joiner == "&&" and status != 0:
                continue
            if joiner == "||" and status == 0:
                continue
            status = self.pipeline(pipeline)
        return self.output(), status

    def output(self) -> str:
        text = "".join(self.out)
        return text[:MAX_OUTPUT]

    def pipeline(self, stages: list[Simple]) -> int:
        data, status = "", 0
        for i, simple in enumerate(stages):
            last = i == len(stages) - 1
            data, status = self.simple(simple, data, last)
        return status

    def simple(self, simple: Simple, stdin: str, last: bool) -> tuple[str, int]:
        self.count += 1
        if self.count > MAX_COMMANDS:
            raise ExecutorError("simulated instruction cap exceeded")
        words = [self.expand(w) for w in simple.words]
        targets = []
        for op, target in simple.redirects:
            target = self.expand(target)
            p = self.path(target)
            parent = self.st.fs.get(posixpath.dirname(p))
            existing = self.st.fs.get(p)
            if parent is None or parent.kind != "dir":
                self.err(f"bash: line 1: {target}: No such file or directory")
                return "", 1
            if existing is not None and existing.kind == "dir":
                self.err(f"bash: line 1: {target}: Is a directory")
                return "", 1
            if existing is None:
                self.st.fs[p] = self.new_node("file")
            elif op == ">":
                self.st.fs[p] = replace(existing, content="")
            targets.append((op, p))
        if words:
            fn = self.table.get(words[0])
            if fn is None:
                self.err(f"bash: line 1: {words[0]}: command not found")
                stdout, status = "", 127
            else:
                stdout, status = fn(words[1:], stdin)
        else:
            stdout, status = "", 0
        if targets:
            p = targets[-1][1]
            f = self.st.fs[p]
            self.st.fs[p] = replace(f, content=f.content + stdout)
            return "", status
        if last:
            self.out.append(stdout)
            return "", status
        return stdout, status

    # -- commands ---------------------------------------------------------
    def cd(self, args, stdin):
        if len(args) > 1:
            self.err("bash: line 1: cd: too many arguments")
            return "", 1
        target = args[0] if args else self.st.env.get("HOME", "/")
        n = self.node(target)
        if n is None:
            self.err(f"bash: line 1: cd: {target}: No such file or directory")
            return "", 1
        if n.kind != "dir":
            self.err(f"bash: line 1: cd: {target}: Not a directory")
            return "", 1
        self.st.cwd = self.path(target)
        return "", 0

    def echo(self, args, stdin):
        newline = True
        i = 0
        while i < len(args) and re.fullmatch(r"-[nq]+", args[i]):
            if "n" in args[i]:
                newline = False
            i += 1
        return " ".join(args[i:]) + ("\n" if newline else ""), 0

    def true(self, args, stdin):
        return "", 0

    def false(self, args, stdin):
        return "", 1

    def pwd(self, args, stdin):
        return self.st.cwd + "\n", 0

    def export(self, args, stdin):
        if not args or args == ["-p"]:
            lines = [f'declare -x {k}="{v}"\n' for k, v in sorted(self.st.env.items())]
            return "".join(lines), 0
        status = 0
        for a in args:
            if a.startswith("-"):
                self.err(f"bash: line 1: export: {a}: invalid option")
                self.err("export: usage: export [-fn] [name[=value] ...] or export -p")
                return "", 2
            name, eq, value = a.partition("=")
            if not NAME_RE.match(name):
                self.err(f"bash: line 1: export: `{a}': not a valid identifier")
                status = 1
                continue
            if eq:
                self.st.env[name] = value
            else:
                self.st.env.setdefault(name, "")
        return "", status

    def unset(self, args, stdin):
        status = 0
        for a in args:
            if not NAME_RE.match(a):
                self.err(f"bash: line 1: unset: `{a}': not a valid identifier")
                status = 1
                continue
            self.st.env.pop(a, None)
        return "", status

    def _usage(self, cmd: str, bad: str, status: int = 1) -> tuple[str, int]:
        if bad.startswith("--"):
            self.err(f"{cmd}: unrecognized option '{bad}'")
        else:
            self.err(f"{cmd}: invalid option -- '{bad}'")
        self.err(f"Try '{cmd} --help' for more information.")
        return "", status

    def touch(self, args, stdin):
        flags, ops, bad = _short_flags(args, "c")
        if bad:
            return self._usage("touch", bad)
        if not ops:
            self.err("touch: missing file operand")
            self.err("Try 'touch --help' for more information.")
            return "", 1
        status = 0
        for op in ops:
            p = self.path(op)
            if p in self.st.fs or "c" in flags:
                continue
            parent = self.st.fs.get(posixpath.dirname(p))
            if parent is None or parent.kind != "dir":
                self.err(f"touch: cannot touch '{op}': No such file or directory")
                status = 1
                continue
            self.st.fs[p] = self.new_node("file")
        return "", status

    def rm(self, args, stdin):
        flags, ops, bad = _short_flags(args, "frR")
        if bad:
            return self._usage("rm", bad)
        force = "f" in flags
        recursive = bool(flags & {"r", "R"})
        if not ops:
            if force:
                return "", 0
            self.err("rm: missing operand")
            self.err("Try 'rm --help' for more information.")
            return "", 1
        status = 0
        for op in ops:
            p = self.path(op)
            n = self.st.fs.get(p)
            if posixpath.basename(op.rstrip("/")) in (".", "..") or p == "/":
                self.err(f"rm: refusing to remove '.' or '..' directory: skipping '{op}'")
                status = 1
            elif n is None:
                if not force:
                    self.err(f"rm: cannot remove '{op}': No such file or directory")
                    status = 1
            elif n.kind == "dir" and not recursive:
                self.err(f"rm: cannot remove '{op}': Is a directory")
                status = 1
            else:
                prefix = p.rstrip("/") + "/"
                for k in [k for k in self.st.fs if k == p or k.startswith(prefix)]:
                    del self.st.fs[k]
        return "", status

    def mkdir(self, args, stdin):
        flags, ops, bad = _short_flags(args, "p")
        if bad:
            return self._usage("mkdir", bad)
        parents = "p" in flags
        if not ops:
            self.err("mkdir: missing operand")
            self.err("Try 'mkdir --help' for more information.")
            return "", 1
        status = 0
        for op in ops:
            p = self.path(op)
            existing = self.st.fs.get(p)
            if existing is not None:
                if parents and existing.kind == "dir":
                    continue
                self.err(f"mkdir: cannot create directory '{op}': File exists")
                status = 1
                continue
            chain = []
            q = p
            while q not in self.st.fs:
                chain.append(q)
                q = posixpath.dirname(q)
            if self.st.fs[q].kind != "dir":
                self.err(f"mkdir: cannot create directory '{op}': Not a directory")
                status = 1
                continue
            if len(chain) > 1 and not parents:
                self.err(f"mkdir: cannot create directory '{op}': No such file or directory")
                status = 1
                continue
            for d in reversed(chain):
                self.st.fs[d] = self.new_node("dir")
        return "", status

    def cat(self, args, stdin):
        flags, ops, bad = _short_flags(args, "n")
        if bad:
            return self._usage("cat", bad)
        chunks = []
        status = 0
        for op in ops or ["-"]:
            if op == "-":
                chunks.append(stdin)
                continue
            n = self.node(op)
            if n is None:
                self.err(f"cat: {op}: No such file or directory")
                status = 1
            elif n.kind == "dir":
                self.err(f"cat: {op}: Is a directory")
                status = 1
            else:
                chunks.append(n.content)
        text = "".join(chunks)
        if "n" in flags and text:
            lines = text.splitlines(keepends=True)
            text = "".join(f"{i:6d}\t{line}" for i, line in enumerate(lines, 1))
        return text, status

    def ls(self, args, stdin):
        flags, ops, bad = _short_flags(args, "alr1")
        if bad:
            return self._usage("ls", bad, 2)
        status = 0
        files, dirs = [], []
        for op in ops or ["."]:
            n = self.node(op)
            if n is None:
                self.err(f"ls: cannot access '{op}': No such file or directory")
                status = 2
            elif n.kind == "dir":
                dirs.append(op)
            else:
                files.append((op, n))
        blocks = []
        if files:
            blocks.append(self._ls_format(sorted(files), flags))
        for d in sorted(dirs, reverse="r" in flags):
            p = self.path(d)
            prefix = "/" if p == "/" else p + "/"
            entries = [
                (k[len(prefix):], n)
                for k, n in self.st.fs.items()
                if k.startswith(prefix) and k != p and "/" not in k[len(prefix):]
            ]
            if "a" not in flags:
                entries = [e for e in entries if not e[0].startswith(".")]
            body = self._ls_format(sorted(entries), flags)
            if len(dirs) + len(files) > 1:
                body = f"{d}:\n{body}"
            blocks.append(body)
        return "\n".join(blocks), status

    def _ls_format(self, entries, flags) -> str:
        if "r" in flags:
            entries = entries[::-1]
        if not entries:
            return ""
        if "l" in flags:
            lines = []
            for name, n in entries:
                size = n.record()["size"]
                lines.append(f"{n.perms} 1 {n.owner} {n.group} {size:>5} {name}\n")
            return "".join(lines)
        names = [name for name, _ in entries]
        if "1" in flags:
            return "\n".join(names) + "\n"
        return "  ".join(names) + "\n"

    def df(self, args, stdin):
        flags: set[str] = set()
        block = None
        fields = None
        ops: list[str] = []
        i = 0
        while i < len(args):
            tok = args[i]
            i += 1
            if tok == "--":
                ops.extend(args[i:])
                break
            if tok == "-" or not tok.startswith("-"):
                ops.append(tok)
            elif tok.startswith("--output"):
                if tok not in ("--output",) and not tok.startswith("--output="):
                    return self._usage("df", tok)
                fields = fields or []
                for f in tok.partition("=")[2].split(",") if "=" in tok else DF_FIELDS:
                    if f not in DF_FIELDS:
                        self.err(f"df: option --output: field '{f}' unknown")
                        self.err("Try 'df --help' for more information.")
                        return "", 1
                    if f in fields:
                        self.err(f"df: option --output: field '{f}' used more than once")
                        self.err("Try 'df --help' for more information.")
                        return "", 1
                    fields.append(f)
            elif tok.startswith("--block-size="):
                block = tok.partition("=")[2]
            elif tok.startswith("--"):
                return self._usage("df", tok)
            else:
                j = 1
                while j < len(tok):
                    ch = tok[j]
                    if ch == "B":
                        rest = tok[j + 1:]
                        if not rest:
                            if i >= len(args):
                                self.err("df: option requires an argument -- 'B'")
                                self.err("Try 'df --help' for more information.")
                                return "", 1
                            rest = args[i]
                            i += 1
                        block = rest
                        break
                    if ch not in "ahT":
                        return self._usage("df", ch)
                    flags.add(ch)
                    j += 1
        if fields is not None and "T" in flags:
            self.err("df: options -T and --output are mutually exclusive")
            self.err("Try 'df --help' for more information.")
            return "", 1
        unit = 1024
        if block is not None:
            m = re.fullmatch(r"(\d*)([KMG]?)", block)
            if not m or not block or (m.group(1) and int(m.group(1)) == 0):
                self.err(f"df: invalid -B argument '{block}'")
                return "", 1
            unit = int(m.group(1) or 1) * {"": 1, "K": 1024, "M": 1024**2, "G": 1024**3}[m.group(2)]
        mounts = [mt for mt in DF_MOUNTS if mt[2] or "a" in flags]
        status = 0
        if ops:
            chosen = []
            for op in ops:
                if self.node(op) is None:
                    self.err(f"df: {op}: No such file or directory")
                    status = 1
                    continue
                p = self.path(op)
                best = max((mt for mt in DF_MOUNTS if p == mt[5] or p.startswith(mt[5].rstrip("/") + "/")),
                           key=lambda mt: len(mt[5]))
                chosen.append(best)
            mounts = chosen
            if not mounts:
                return "", status
        if fields is None:
            fields = ["source", *(["fstype"] if "T" in flags else []), "size", "used", "avail", "pcent", "target"]
        size_head = "Size" if "h" in flags else _block_header(unit, block)
        header = {"source": "Filesystem", "fstype": "Type", "size": size_head, "used": "Used",
                  "avail": "Avail" if "h" in flags else "Available", "pcent": "Use%", "target": "Mounted on"}
        table = [[header[f] for f in fields]]
        for src, fstype, size, used, avail, target in mounts:
            vals = {"source": src, "fstype": fstype, "target": target,
                    "pcent": f"{-(-used * 100 // size)}%" if size else "-"}
            for f, nbytes in (("size", size), ("used", used), ("avail", avail)):
                vals[f] = _human(nbytes) if "h" in flags else str(-(-nbytes // unit))
            table.append([vals[f] for f in fields])
        widths = [max(len(r[c]) for r in table) for c in range(len(fields))]
        lines = [" ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip() for r in table]
        return "\n".join(lines) + "\n", status

    def ping(self, args, stdin):
        if not args:
            self.err("ping: usage error: Destination address required")
            return "", 1
        self.err("ping: connect: Network is unreachable")
        return "", 2

    def curl(self, args, stdin):
        host = next((a for a in args if not a.startswith("-")), None)
        if host is None:
            self.err("curl: try 'curl --help' for more information")
            return "", 2
        self.err(f"curl: (6) Could not resolve host: {host}")
        return "", 6

    def wget(self, args, stdin):
        host = next((a for a in args if not a.startswith("-")), None)
        if host is None:
            self.err("wget: missing URL")
            return "", 1
        self.err(f"wget: unable to resolve host address '{host}'")
        return "", 4


class SimulatedBackend(ExecutorBackend):
    """In-process deterministic backend; every run starts from the manifest state."""

    deterministic = True

    def __init__(self, manifest: str | Path = DEFAULT_MANIFEST):
        super().__init__()
        self._pristine = load_manifest(manifest)
        self._pristine_snap = self._pristine.snapshot()
        self._state: SimState | None = None

    @property
    def home(self) -> str:
        return self._pristine.cwd

    def pristine_snapshot(self) -> ContextSnapshot:
        return self._pristine_snap

    def current_snapshot(self) -> ContextSnapshot:
        return (self._state or self._pristine).snapshot()

    def run(self, command: str) -> RunResult:
        self._state = self._pristine.copy()
        shell = SimShell(self._state)
        output, status = shell.run(command)
        return RunResult(output, status, self._state.snapshot())

    def revert(self) -> None:
        self._state = None
