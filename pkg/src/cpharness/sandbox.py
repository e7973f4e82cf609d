"""Compile and run guest programs under time and memory limits.

Isolation is process level only: CPU-time and address-space rlimits plus a
wall-clock watchdog. Guests are started by a small compiled launcher so that
measured peak memory belongs to the guest alone. This is not a security boundary; run untrusted code
inside a container if that matters.

Every compile and every execution is cached on disk under
``<cache>/<hash[:2]>/<hash>.json`` (binaries alongside as ``.bin``), written
via write-then-rename so concurrent workers never see partial records.
"""

from __future__ import annotations

import base64
import enum
import hashlib
import json
import logging
import math
import os
import shutil
import signal
import subprocess
import sys
import tempfile
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .domain import Limits, Subtask, TestCase

log = logging.getLogger(__name__)

MIB = 1024 * 1024
DEFAULT_STDOUT_CAP = 8 * MIB


class Status(str, enum.Enum):
    OK = "OK"
    WRONG_OUTPUT = "WRONG_OUTPUT"
    TIME_LIMIT = "TIME_LIMIT"
    MEMORY_LIMIT = "MEMORY_LIMIT"
    RUNTIME_ERROR = "RUNTIME_ERROR"
    COMPILE_ERROR = "COMPILE_ERROR"


class ToolchainError(RuntimeError):
    """The configured guest toolchain is missing or unusable."""


class HarnessError(RuntimeError):
    """The harness itself failed; never a verdict about the guest."""


@dataclass(frozen=True)
class GuestProgram:
    source: str
    language: str = "cpp"
    name: str = ""

    def __post_init__(self):
        if not self.source.strip():
            raise ValueError("guest program source is empty")


@dataclass(frozen=True)
class Artifact:
    key: str
    language: str
    path: Path | None
    status: Status
    diagnostics: str = ""

    @property
    def ok(self) -> bool:
        return self.status is Status.OK


@dataclass(frozen=True)
class RunResult:
    status: Status
    stdout: bytes = b""
    time_ms: int = 0
    memory_mib: int = 0
    exit_code: int | None = 0

    def to_json(self) -> dict:
        return {"status": self.status.value,
                "stdout": base64.b64encode(self.stdout).decode("ascii"),
                "time_ms": self.time_ms, "memory_mib": self.memory_mib,
                "exit_code": self.exit_code}

    @classmethod
    def from_json(cls, d: dict) -> "RunResult":
        return cls(Status(d["status"]), base64.b64decode(d["stdout"]), d["time_ms"],
                   d["memory_mib"], d["exit_code"])


@dataclass(frozen=True)
class Toolchain:
    """Command templates; ``{src}``, ``{exe}`` and ``{artifact}`` are substituted."""

    compile: tuple[str, ...] | None
    run: tuple[str, ...]
    source_name: str
    version: tuple[str, ...] = ()


DEFAULT_TOOLCHAINS = {
    "cpp": Toolchain(
        compile=("g++", "-O2", "-std=gnu++17", "-pipe", "-o", "{exe}", "{src}"),
        run=("{artifact}",),
        source_name="main.cpp",
        version=("g++", "--version"),
    ),
    "python": Toolchain(
        compile=(sys.executable, "-m", "py_compile", "{src}"),
        run=(sys.executable, "{artifact}"),
        source_name="main.py",
        version=(sys.executable, "--version"),
    ),
}

# Forked children inherit the parent's peak RSS in ru_maxrss, even across exec, so
# guests are forked from this small exec'd launcher rather than from Python.
# argv: cpu_s as_bytes fsize report_path cmd... ; report: "wstatus maxrss_kib user_us sys_us"
_LAUNCHER_SRC = r"""
#include <cstdio>
#include <cstdlib>
#include <sys/resource.h>
#include <sys/time.h>
#include <sys/wait.h>
#include <unistd.h>

static void lim(int r, rlim_t v, rlim_t h) { rlimit l{v, h}; setrlimit(r, &l); }

int main(int argc, char** argv) {
    if (argc < 6) return 125;
    rlim_t cpu = strtoull(argv[1], 0, 10), as = strtoull(argv[2], 0, 10);
    rlim_t fsz = strtoull(argv[3], 0, 10);
    pid_t pid = fork();
    if (pid < 0) return 126;
    if (pid == 0) {
        lim(RLIMIT_CPU, cpu, cpu + 1);
        lim(RLIMIT_AS, as, as);
        lim(RLIMIT_FSIZE, fsz, fsz);
        lim(RLIMIT_CORE, 0, 0);
        execvp(argv[5], argv + 5);
        _exit(127);
    }
    int st = 0;
    rusage ru{};
    if (wait4(pid, &st, 0, &ru) < 0) return 126;
    FILE* f = fopen(argv[4], "w");
    if (!f) return 126;
    fprintf(f, "%d %ld %lld %lld\n", st, ru.ru_maxrss,
            (long long)ru.ru_utime.tv_sec * 1000000 + ru.ru_utime.tv_usec,
            (long long)ru.ru_stime.tv_sec * 1000000 + ru.ru_stime.tv_usec);
    return fclose(f) == 0 ? 0 : 126;
}
"""

_MEMORY_MARKERS = (b"std::bad_alloc", b"MemoryError", b"Cannot allocate memory", b"out of memory")


def normalize_output(data: bytes) -> bytes:
    """Strip trailing whitespace on each line and trailing newlines."""
    lines = data.replace(b"\r\n", b"\n").split(b"\n")
    return b"\n".join(line.rstrip() for line in lines).rstrip(b"\n")


def outputs_match(got: bytes, expected: bytes) -> bool:
    return normalize_output(got) == normalize_output(expected)


def _sha(*parts) -> str:
    h = hashlib.sha256()
    for p in parts:
        if isinstance(p, str):
            p = p.encode()
        h.update(len(p).to_bytes(8, "little"))
        h.update(p)
    return h.hexdigest()


def _atomic_write(path: Path, data: bytes, mode: int | None = None):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        if mode is not None:
            os.chmod(tmp, mode)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass
class Sandbox:
    cache_dir: Path
    toolchains: dict[str, Toolchain] = field(default_factory=lambda: dict(DEFAULT_TOOLCHAINS))
    workers: int = 1
    stdout_cap: int = DEFAULT_STDOUT_CAP
    retries: int = 2
    # address space granted on top of the memory limit for runtime/loader mappings
    memory_slack_mib: int = 64
    wall_factor: float = 3.0
    use_cache: bool = True

    def __post_init__(self):
        self.cache_dir = Path(self.cache_dir)
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        self.compile_invocations = 0
        self.executions = 0
        self._versions: dict[str, str] = {}
        self._lock = threading.Lock()
        self._key_locks: dict[str, threading.Lock] = {}
        self._launcher: Path | None = None

    # -- cache plumbing ---------------------------------------------------

    def _record_path(self, key: str, suffix: str = ".json") -> Path:
        return self.cache_dir / key[:2] / f"{key}{suffix}"

    def _load_record(self, key: str) -> dict | None:
        if not self.use_cache:
            return None
        p = self._record_path(key)
        if not p.exists():
            return None
        return json.loads(p.read_text())

    def _store_record(self, key: str, record: dict):
        if self.use_cache:
            _atomic_write(self._record_path(key), json.dumps(record, sort_keys=True).encode())

    def _key_lock(self, key: str) -> threading.Lock:
        with self._lock:
            return self._key_locks.setdefault(key, threading.Lock())

    def blob_path(self, data: bytes) -> Path:
        """Content-addressed file holding `data`; stable paths keep checker runs cacheable."""
        key = _sha("blob", data)
        p = self._record_path(key, ".dat")
        if not p.exists():
            _atomic_write(p, data)
        return p

    # -- toolchain --------------------------------------------------------

    def toolchain(self, language: str) -> Toolchain:
        try:
            tc = self.toolchains[language]
        except KeyError:
            raise ToolchainError(f"no toolchain configured for {language!r}") from None
        for cmd in (tc.compile, tc.run):
            if cmd and "{" not in cmd[0] and shutil.which(cmd[0]) is None:
                raise ToolchainError(f"toolchain for {language!r}: {cmd[0]!r} not found")
        return tc

    def toolchain_version(self, language: str) -> str:
        if language not in self._versions:
            tc = self.toolchain(language)
            out = ""
            if tc.version:
                try:
                    out = subprocess.run(tc.version, capture_output=True, text=True, timeout=30).stdout
                except OSError as e:
                    raise ToolchainError(f"cannot query toolchain for {language!r}: {e}") from e
            self._versions[language] = out.splitlines()[0] if out else ""
        return self._versions[language]

    # -- compile ----------------------------------------------------------

    def compile(self, program: GuestProgram) -> Artifact:
        tc = self.toolchain(program.language)
        key = _sha("compile", program.language, self.toolchain_version(program.language),
                   "\0".join(tc.compile or ()), program.source)
        binary = self._record_path(key, ".bin")
        with self._key_lock(key):
            rec = self._load_record(key)
            if rec is not None and (rec["status"] != Status.OK.value or binary.exists()):
                return Artifact(key, program.language, binary if rec["status"] == "OK" else None,
                                Status(rec["status"]), rec.get("diagnostics", ""))
            status, diagnostics = self._compile_uncached(program, tc, binary)
            self._store_record(key, {"kind": "compile", "status": status.value,
                                     "diagnostics": diagnostics})
        return Artifact(key, program.language, binary if status is Status.OK else None,
                        status, diagnostics)

    def _compile_uncached(self, program, tc, binary: Path):
        with tempfile.TemporaryDirectory(prefix="cph-build-") as tmp:
            src = Path(tmp) / tc.source_name
            src.write_text(program.source)
            exe = Path(tmp) / "prog"
            if tc.compile is None:
                shutil.copy(src, exe)
                diag = ""
            else:
                cmd = [c.format(src=src, exe=exe) for c in tc.compile]
                with self._lock:
                    self.compile_invocations += 1
                try:
                    proc = subprocess.run(cmd, capture_output=True, timeout=120, cwd=tmp)
                except FileNotFoundError as e:
                    raise ToolchainError(str(e)) from e
                except subprocess.TimeoutExpired:
                    return Status.COMPILE_ERROR, "compilation timed out"
                diag = proc.stderr.decode(errors="replace")[-20000:]
                if proc.returncode != 0:
                    return Status.COMPILE_ERROR, diag
                if not exe.exists():
                    # interpreters: the checked source is the artifact
                    shutil.copy(src, exe)
            _atomic_write(binary, exe.read_bytes(), mode=0o755)
            return Status.OK, diag

    # -- execute ----------------------------------------------------------

    def execute(self, artifact: Artifact, input: bytes, limits: Limits,
                args: Sequence[str] = ()) -> RunResult:
        if not artifact.ok or artifact.path is None:
            return RunResult(Status.COMPILE_ERROR, b"", 0, 0, None)
        key = _sha("run", artifact.key, "\0".join(args), hashlib.sha256(input).hexdigest(),
                   str(limits.time_ms), str(limits.memory_mib), str(self.stdout_cap))
        rec = self._load_record(key)
        if rec is not None:
            return RunResult.from_json(rec)
        last_err = None
        for attempt in range(self.retries + 1):
            try:
                result = self._execute_uncached(artifact, input, limits, args)
                break
            except OSError as e:
                last_err = e
                log.warning("harness failure running %s (attempt %d): %s",
                            artifact.key[:12], attempt + 1, e)
                time.sleep(0.05 * (attempt + 1))
        else:
            raise HarnessError(f"could not run {artifact.key[:12]}: {last_err}")
        self._store_record(key, {"kind": "run", **result.to_json()})
        return result

    def _launcher_path(self) -> Path:
        if self._launcher is not None:
            return self._launcher
        cxx = self.toolchains.get("cpp", DEFAULT_TOOLCHAINS["cpp"]).compile[0]
        key = _sha("launcher", self.toolchain_version("cpp"), _LAUNCHER_SRC)
        path = self._record_path(key, ".bin")
        if not path.exists():
            with tempfile.TemporaryDirectory(prefix="cph-launcher-") as tmp:
                src = Path(tmp) / "launcher.cpp"
                src.write_text(_LAUNCHER_SRC)
                exe = Path(tmp) / "launcher"
                try:
                    proc = subprocess.run([cxx, "-O2", "-o", str(exe), str(src)],
                                          capture_output=True, timeout=120)
                except FileNotFoundError as e:
                    raise ToolchainError(f"cannot build the run launcher: {e}") from e
                if proc.returncode != 0:
                    raise ToolchainError("cannot build the run launcher: "
                                         + proc.stderr.decode(errors="replace")[-2000:])
                _atomic_write(path, exe.read_bytes(), 0o755)
        self._launcher = path
        return path

    def _execute_uncached(self, artifact: Artifact, input: bytes, limits: Limits,
                          args: Sequence[str]) -> RunResult:
        tc = self.toolchain(artifact.language)
        cmd = [c.format(artifact=artifact.path) for c in tc.run] + list(args)
        cpu_s = math.ceil(limits.time_ms / 1000) + 1
        as_bytes = (limits.memory_mib + self.memory_slack_mib) * MIB
        fsize = self.stdout_cap + 1

        launcher = self._launcher_path()
        with self._lock:
            self.executions += 1
        with tempfile.TemporaryDirectory(prefix="cph-run-") as tmp:
            tmp = Path(tmp)
            (tmp / "stdin").write_bytes(input)
            report = tmp / "rusage"
            full = [str(launcher), str(cpu_s), str(as_bytes), str(fsize), str(report)] + cmd
            with open(tmp / "stdin", "rb") as fin, open(tmp / "stdout", "wb") as fout, \
                    open(tmp / "stderr", "wb") as ferr:
                proc = subprocess.Popen(full, stdin=fin, stdout=fout, stderr=ferr, cwd=tmp,
                                        start_new_session=True, close_fds=True)
                fired = threading.Event()

                def watchdog():
                    fired.set()
                    try:
                        os.killpg(proc.pid, signal.SIGKILL)
                    except ProcessLookupError:
                        pass

                wall = max(limits.time_ms * self.wall_factor, limits.time_ms + 500) / 1000
                timer = threading.Timer(wall, watchdog)
                started = time.perf_counter()
                timer.start()
                try:
                    proc.wait()
                finally:
                    timer.cancel()
                elapsed_ms = int((time.perf_counter() - started) * 1000)
                # the launcher is a session leader; reap anything the guest left behind
                try:
                    os.killpg(proc.pid, signal.SIGKILL)
                except ProcessLookupError:
                    pass
            stdout = (tmp / "stdout").read_bytes()
            stderr = (tmp / "stderr").read_bytes()[-4096:]
            fields = report.read_text().split() if report.exists() else []

        if len(fields) == 4:
            wstatus, maxrss_kib, user_us, sys_us = map(int, fields)
            code = os.waitstatus_to_exitcode(wstatus)
            time_ms = int(round((user_us + sys_us) / 1000))
            memory_mib = math.ceil(maxrss_kib / 1024)
        elif fired.is_set():
            code, time_ms, memory_mib = -signal.SIGKILL, elapsed_ms, 0
        else:
            raise OSError(f"launcher exited {proc.returncode} without a usage report")
        sig = -code if code < 0 else None
        overflow = len(stdout) > self.stdout_cap or sig == signal.SIGXFSZ
        stdout = stdout[: self.stdout_cap]

        if fired.is_set() or sig == signal.SIGXCPU or time_ms > limits.time_ms:
            status = Status.TIME_LIMIT
        elif memory_mib > limits.memory_mib:
            status = Status.MEMORY_LIMIT
        elif overflow:
            status = Status.WRONG_OUTPUT
        elif code != 0 and any(m in stderr for m in _MEMORY_MARKERS):
            status = Status.MEMORY_LIMIT
        elif code != 0:
            status = Status.RUNTIME_ERROR
        else:
            status = Status.OK
        return RunResult(status, stdout, time_ms, memory_mib, code)

    # -- parallel map -----------------------------------------------------

    def run_many(self, fn: Callable, items: Iterable) -> list:
        """Apply `fn` to every item on the worker pool; results keep input order."""
        items = list(items)
        if self.workers <= 1 or len(items) <= 1:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            return list(pool.map(fn, items))

    # -- judging ----------------------------------------------------------

    def check_test(self, artifact: Artifact, test: TestCase, limits: Limits,
                   checker: Artifact | None = None) -> tuple[RunResult, float]:
        """Run one test; returns the run and the awarded fraction in [0, 1]."""
        run = self.execute(artifact, test.input, limits)
        if run.status is not Status.OK:
            return run, 0.0
        if test.expected_output is not None and checker is None:
            if outputs_match(run.stdout, test.expected_output):
                return run, 1.0
            return RunResult(Status.WRONG_OUTPUT, run.stdout, run.time_ms, run.memory_mib,
                             run.exit_code), 0.0
        if checker is None or not checker.ok:
            raise HarnessError("test needs a checker but none compiled")
        fraction = self.run_checker(checker, test, run.stdout)
        if fraction <= 0:
            run = RunResult(Status.WRONG_OUTPUT, run.stdout, run.time_ms, run.memory_mib,
                            run.exit_code)
        return run, fraction

    def run_checker(self, checker: Artifact, test: TestCase, output: bytes) -> float:
        """Checker protocol: ``checker <input> <output> <answer>``.

        Exit 0 accepts; a leading number on stdout is the awarded fraction.
        """
        args = [str(self.blob_path(test.input)), str(self.blob_path(output)),
                str(self.blob_path(test.expected_output or b""))]
        res = self.execute(checker, b"", Limits(10_000, 1024), args)
        if res.status in (Status.TIME_LIMIT, Status.MEMORY_LIMIT) or (
                res.status is Status.RUNTIME_ERROR and (res.exit_code or 0) < 0):
            raise HarnessError(f"checker failed with {res.status.value}")
        if res.status is not Status.OK:
            return 0.0
        tokens = res.stdout.split()
        if not tokens:
            return 1.0
        try:
            value = float(tokens[0])
        except ValueError:
            return 1.0
        return min(max(value, 0.0), 1.0)

    def judge_subtask(self, artifact: Artifact, subtask: Subtask, limits: Limits,
                      checker: Artifact | None = None) -> float:
        """Points earned on one subtask.

        All-or-nothing unless a checker awards fractions, in which case the
        minimum fraction over the tests scales the points. Stops at the first
        test worth nothing.
        """
        if not subtask.tests:
            raise ValueError(f"subtask {subtask.id!r} has no tests")
        if checker is not None and not checker.ok:
            raise HarnessError(f"checker for subtask {subtask.id!r} did not compile")
        worst = 1.0
        for test in subtask.tests:
            _, frac = self.check_test(artifact, test, limits, checker)
            worst = min(worst, frac)
            if worst <= 0:
                return 0.0
        return subtask.points * worst
