"""Real-process backend: every input runs in a throwaway copy of a seed tree.

Snapshots cover ``cwd``, ``env`` and ``fs`` only. Paths inside the working
copy are reported relative to its root (so the copy's root appears as ``/``).
"""

from __future__ import annotations

import grp
import hashlib
import os
import pwd
import shutil
import signal
import stat
import subprocess
import tempfile
from pathlib import Path

from .base import TIMEOUT_EXIT, ContextSnapshot, ExecutorBackend, ExecutorError, RunResult

DEFAULT_ALLOWLIST = ("PATH", "LANG", "LC_ALL", "TERM")
DEFAULT_TIMEOUT = 5.0

# $1: snapshot file, $2: the input. The trap records cwd and env on any exit.
_WRAPPER = r"""__snap="$1"; __cmd="$2"; shift 2
trap '__rc=$?; { pwd; printf "\0"; env -0; } > "$__snap" 2>/dev/null; exit $__rc' EXIT
eval "$__cmd"
"""


def _name(lookup, ident: int) -> str:
    try:
        return lookup(ident)[0]
    except KeyError:
        return str(ident)


class SandboxBackend(ExecutorBackend):
    capabilities = frozenset({"cwd", "env", "fs"})
    deterministic = False

    def __init__(
        self,
        seed_root: str | os.PathLike,
        shell: str = "/bin/bash",
        timeout: float = DEFAULT_TIMEOUT,
        env_allowlist: tuple[str, ...] = DEFAULT_ALLOWLIST,
        workdir: str | os.PathLike | None = None,
    ):
        super().__init__()
        self.seed_root = Path(seed_root)
        if not self.seed_root.is_dir():
            raise ExecutorError(f"sandbox seed tree not found: {self.seed_root}")
        if shutil.which(shell) is None and not Path(shell).is_file():
            raise ExecutorError(f"shell not found: {shell}")
        self.shell = shell
        self.timeout = timeout
        self.env_allowlist = tuple(env_allowlist)
        self._base = Path(tempfile.mkdtemp(prefix="shellsynth-", dir=workdir))
        self._root: Path | None = None
        self._pristine = self._probe()

    # -- working copy -----------------------------------------------------
    def _fresh_root(self) -> Path:
        if self._root is None:
            root = self._base / "root"
            shutil.copytree(self.seed_root, root, symlinks=True)
            self._root = root
        return self._root

    def revert(self) -> None:
        if self._root is not None:
            shutil.rmtree(self._root, ignore_errors=True)
            self._root = None

    def close(self) -> None:
        self.revert()
        shutil.rmtree(self._base, ignore_errors=True)

    # -- snapshots --------------------------------------------------------
    def _env(self, root: Path) -> dict[str, str]:
        env = {k: os.environ[k] for k in self.env_allowlist if k in os.environ}
        env["HOME"] = str(root)
        return env

    def _virtual(self, path: str, root: Path) -> str:
        r = str(root)
        if path == r:
            return "/"
        if path.startswith(r + "/"):
            return path[len(r):]
        return path

    def _scan(self, root: Path) -> dict[str, dict]:
        fs = {}
        for dirpath, dirnames, filenames in os.walk(root):
            dirnames.sort()
            for name in [None, *sorted(filenames)]:
                p = dirpath if name is None else os.path.join(dirpath, name)
                st = os.lstat(p)
                if stat.S_ISDIR(st.st_mode):
                    kind, size, digest = "dir", 0, ""
                elif stat.S_ISLNK(st.st_mode):
                    kind, size, digest = "link", 0, os.readlink(p)
                else:
                    kind, size = "file", st.st_size
                    with open(p, "rb") as fh:
                        digest = hashlib.sha256(fh.read()).hexdigest()[:16]
                fs[self._virtual(p, root)] = {
                    "group": _name(grp.getgrgid, st.st_gid),
                    "hash": digest,
                    "kind": kind,
                    "owner": _name(pwd.getpwuid, st.st_uid),
                    "perms": stat.filemode(st.st_mode),
                    "size": size,
                }
        return fs

    def _probe(self) -> ContextSnapshot:
        res = self.run(":")
        self.revert()
        return res.after

    def pristine_snapshot(self) -> ContextSnapshot:
        return self._pristine

    def current_snapshot(self) -> ContextSnapshot:
        res = self.run(":")
        return res.after

    # -- execution --------------------------------------------------------
    def run(self, command: str) -> RunResult:
        root = self._fresh_root()
        snap_file = self._base / "snap"
        if snap_file.exists():
            snap_file.unlink()
        env = self._env(root)
        try:
            proc = subprocess.Popen(
                [self.shell, "-c", _WRAPPER, "shellsynth", str(snap_file), command],
                cwd=root,
                env=env,
                stdin=subprocess.DEVNULL,
                stdout=subprocess.PIPE,
                stderr=subprocess.STDOUT,
                start_new_session=True,
            )
        except OSError as exc:
            raise ExecutorError(f"failed to start {self.shell}: {exc}") from exc
        try:
            raw, _ = proc.communicate(timeout=self.timeout)
            code = proc.returncode
        except subprocess.TimeoutExpired:
            os.killpg(proc.pid, signal.SIGKILL)
            raw, _ = proc.communicate()
            code = TIMEOUT_EXIT
        if code < 0:
            code = 128 - code
        output = (raw or b"").decode("utf-8", errors="replace")

        pristine = getattr(self, "_pristine", None)
        if snap_file.exists():
            data = snap_file.read_bytes().decode("utf-8", errors="replace")
            head, _, rest = data.partition("\0")
            cwd = self._virtual(head.rstrip("\n"), root)
            env_after = dict(item.split("=", 1) for item in rest.split("\0") if "=" in item)
            env_after = {
                k: self._virtual(v, root) if k in ("HOME", "PWD", "OLDPWD") else v
                for k, v in env_after.items()
            }
        elif pristine is not None:
            # killed before the trap ran: cwd/env are unobservable
            cwd, env_after = pristine.cwd, dict(pristine.env)
        else:
            raise ExecutorError("sandbox probe did not report its context")
        after = ContextSnapshot(cwd=cwd, env=env_after, fs=self._scan(root))
        return RunResult(output, code & 0xFF, after)
