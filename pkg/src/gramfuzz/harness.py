"""Target execution: in-process toy targets and external commands.

In-process targets call ``sink.hit(block_id)`` as they pass instrumented
blocks; the trace folds into an edge-count map afterwards.  Hangs are
detected by a deterministic fuel budget derived from the timeout, so replay
behaves identically across runs.  Crashing executions are contained: the
target raises, the harness records, and the campaign carries on.

External commands receive the input via a file substituted for the ``@@``
argv placeholder (or on stdin when no placeholder is present) and report
coverage by writing the 65536-byte map to the path named by the
GRAMFUZZ_COV_FILE environment variable.  Exit by signal counts as a crash.
"""

from __future__ import annotations

import os
import subprocess
import tempfile
import time
from dataclasses import dataclass, field

import numpy as np

from .coverage import MAP_SIZE, accumulate_trace, new_map

# Fuel is a block-hit budget standing in for wall time on in-process targets.
FUEL_PER_MS = 2000


class HarnessError(Exception):
    """Target setup or side-channel failure (not a target crash)."""


class TargetCrash(Exception):
    """Raised by a target at a planted or genuine failure site."""

    def __init__(self, token: str):
        super().__init__(token)
        self.token = token


class TargetHang(Exception):
    """Raised by the sink when the fuel budget is exhausted."""


class CoverageSink:
    """Collects the block trace of one execution."""

    __slots__ = ("trace", "fuel")

    def __init__(self, fuel: int = 1_000_000):
        self.trace: list[int] = []
        self.fuel = fuel

    def hit(self, block_id: int) -> None:
        self.trace.append(block_id)
        if len(self.trace) > self.fuel:
            raise TargetHang()


@dataclass
class TargetSpec:
    kind: str  # "in_process" | "external_command"
    name: str | None = None
    command: list[str] | None = None
    timeout_ms: int = 50

    def __post_init__(self):
        if self.kind == "in_process":
            if not self.name:
                raise HarnessError("in_process target needs a registry name")
        elif self.kind == "external_command":
            if not self.command:
                raise HarnessError("external_command target needs an argv list")
        else:
            raise HarnessError(f"unknown target kind {self.kind!r}")


@dataclass
class ExecResult:
    status: str  # "ok" | "crash" | "hang"
    cov: np.ndarray = field(repr=False)
    exec_micros: int
    crash_token: str | None = None


def resolve_target(name: str):
    from . import targets

    fn = targets.REGISTRY.get(name)
    if fn is None:
        known = ", ".join(sorted(targets.REGISTRY))
        raise HarnessError(f"unknown target {name!r} (have: {known})")
    return fn


def execute(t: TargetSpec, data: bytes) -> ExecResult:
    """Run the target once on data and return status plus coverage map."""
    if t.kind == "in_process":
        return _execute_in_process(t, data)
    return _execute_external(t, data)


def _execute_in_process(t: TargetSpec, data: bytes) -> ExecResult:
    fn = resolve_target(t.name)
    sink = CoverageSink(fuel=t.timeout_ms * FUEL_PER_MS)
    status, token = "ok", None
    start = time.perf_counter_ns()
    try:
        fn(data, sink)
    except TargetCrash as e:
        status, token = "crash", e.token
    except TargetHang:
        status = "hang"
    except Exception as e:  # an unplanned target bug is still a crash
        status, token = "crash", type(e).__name__
    micros = (time.perf_counter_ns() - start) // 1000
    if status == "hang":
        micros = max(micros, t.timeout_ms * 1000)
    cov = new_map()
    accumulate_trace(cov, sink.trace)
    return ExecResult(status, cov, int(micros), token)


def _execute_external(t: TargetSpec, data: bytes) -> ExecResult:
    with tempfile.TemporaryDirectory(prefix="gramfuzz-") as work:
        cov_path = os.path.join(work, "cov.bin")
        input_path = os.path.join(work, "input")
        argv = [a.replace("@@", input_path) for a in t.command]
        use_stdin = not any("@@" in a for a in t.command)
        with open(input_path, "wb") as f:
            f.write(data)
        env = dict(os.environ, GRAMFUZZ_COV_FILE=cov_path)
        start = time.perf_counter_ns()
        try:
            proc = subprocess.run(
                argv,
                input=data if use_stdin else None,
                stdout=subprocess.DEVNULL,
                stderr=subprocess.DEVNULL,
                env=env,
                timeout=t.timeout_ms / 1000.0,
            )
            returncode = proc.returncode
            timed_out = False
        except subprocess.TimeoutExpired:
            returncode = 0
            timed_out = True
        except OSError as e:
            raise HarnessError(f"cannot run {argv[0]!r}: {e}") from None
        micros = (time.perf_counter_ns() - start) // 1000

        cov = _read_cov_file(cov_path, strict=not timed_out and returncode >= 0)
        if timed_out:
            return ExecResult("hang", cov, max(int(micros), t.timeout_ms * 1000))
        if returncode < 0:
            return ExecResult("crash", cov, int(micros), f"signal{-returncode}")
        return ExecResult("ok", cov, int(micros))


def _read_cov_file(path: str, strict: bool) -> np.ndarray:
    try:
        with open(path, "rb") as f:
            raw = f.read()
    except FileNotFoundError:
        if strict:
            raise HarnessError("target wrote no coverage file (GRAMFUZZ_COV_FILE)") from None
        return new_map()
    if len(raw) != MAP_SIZE:
        if strict:
            raise HarnessError(f"coverage file has {len(raw)} bytes, expected {MAP_SIZE}")
        return new_map()
    return np.frombuffer(raw, dtype=np.uint8).copy()


def toy_minijs_target(data: bytes, sink: CoverageSink) -> None:
    from .targets import minijs

    minijs.run(data, sink)


def toy_xml_target(data: bytes, sink: CoverageSink) -> None:
    from .targets import plist_xml

    plist_xml.run(data, sink)
