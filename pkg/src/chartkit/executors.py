"""Execution backends for generated plotting scripts.

The pipeline only needs a run(code, timeout, output_path) surface.  Two
backends implement it: a deterministic offline mock for tests, and a
subprocess client that drives the external sandboxed executor service over
its line-delimited JSON protocol.
"""

from __future__ import annotations

import base64
import json
import logging
import subprocess
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

logger = logging.getLogger(__name__)

# Marker recognized by the mock executor to script a failure.
MOCK_FAIL_MARKER = "# MOCK_EXEC_FAIL"

# Constant 4x3 PNG written by the mock so rendered references always decode
# and reruns are byte-identical.
_MOCK_PNG = base64.b64decode(
    "iVBORw0KGgoAAAANSUhEUgAAAAQAAAADCAIAAAA7ljmRAAAAFElEQVR4nGP88OE/"
    "AwwwMSABFA4AasgC5cxmd3EAAAAASUVORK5CYII="
)


class ExecutorUnavailable(RuntimeError):
    pass


@dataclass(frozen=True)
class ExecOutcome:
    ok: bool
    error: str = ""


class Executor(Protocol):
    def run(self, code: str, timeout_s: float, output_path: Path) -> ExecOutcome: ...


class MockExecutor:
    """Offline executor: writes a constant PNG unless the code is marked to fail."""

    def run(self, code: str, timeout_s: float, output_path: Path) -> ExecOutcome:
        if MOCK_FAIL_MARKER in code:
            reason = "scripted failure"
            for line in code.splitlines():
                if MOCK_FAIL_MARKER in line:
                    tail = line.split(MOCK_FAIL_MARKER, 1)[1].strip()
                    if tail:
                        reason = tail
                    break
            return ExecOutcome(ok=False, error=reason)
        output_path.parent.mkdir(parents=True, exist_ok=True)
        output_path.write_bytes(_MOCK_PNG)
        return ExecOutcome(ok=True)


class SubprocessExecutor:
    """Client for the sandboxed executor service (one JSON request per line).

    The service is started with its sandbox root as the sole positional
    argument and answers each request line with exactly one response line.
    """

    def __init__(self, sandbox_root: str | Path, command: list[str] | None = None):
        self.sandbox_root = Path(sandbox_root)
        self.sandbox_root.mkdir(parents=True, exist_ok=True)
        self.command = list(command) if command else [sys.executable, "-m", "chartexec"]
        self._proc: subprocess.Popen | None = None
        self._next_id = 0

    def _ensure_started(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            try:
                self._proc = subprocess.Popen(
                    self.command + [str(self.sandbox_root)],
                    stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE,
                    text=True,
                )
            except OSError as exc:
                raise ExecutorUnavailable(f"cannot start executor: {exc}") from exc
        return self._proc

    def run(self, code: str, timeout_s: float, output_path: Path) -> ExecOutcome:
        proc = self._ensure_started()
        self._next_id += 1
        request = {
            "id": f"req-{self._next_id}",
            "code": code,
            "timeout_ms": int(timeout_s * 1000),
            "output_path": str(output_path),
        }
        try:
            proc.stdin.write(json.dumps(request) + "\n")
            proc.stdin.flush()
            line = proc.stdout.readline()
        except (BrokenPipeError, OSError) as exc:
            raise ExecutorUnavailable(f"executor pipe broken: {exc}") from exc
        if not line:
            raise ExecutorUnavailable("executor closed its output stream")
        response = json.loads(line)
        if response.get("status") == "ok":
            return ExecOutcome(ok=True)
        if response.get("status") == "timeout":
            return ExecOutcome(ok=False, error="Timeout")
        return ExecOutcome(ok=False, error=response.get("error_text", "unknown error"))

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            self._proc.stdin.close()
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
        self._proc = None

    def __enter__(self) -> "SubprocessExecutor":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()
