"""Run one untrusted plotting script in a sandboxed subprocess.

Each script executes in a fresh Python process whose working directory is
the sandbox root.  Headless rendering is forced through the environment,
an audit hook inside the child rejects writes that would land outside the
sandbox, and the timeout is enforced by killing the process.  If the
script builds a figure but never saves it, the rendered figure is saved
to the requested output path before the child exits.
"""

from __future__ import annotations

import os
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

from PIL import Image, UnidentifiedImageError

# Extra wall-clock allowance for process teardown after a timeout kill.
GRACE_MS = 1000

# Cap on error text carried back over the protocol.
_MAX_ERROR_CHARS = 2000

# Executed in the child as `python -c`.  argv: code_path, output_path,
# sandbox root.  The audit hook is installed after the script source is
# read so the only unguarded I/O is our own read of the script file.
_BOOTSTRAP = r"""
import os
import sys

code_path, output_path, sandbox = sys.argv[1], sys.argv[2], sys.argv[3]
sandbox = os.path.realpath(sandbox)

def _inside(target):
    real = os.path.realpath(os.path.join(os.getcwd(), os.fsdecode(target)))
    return real == sandbox or real.startswith(sandbox + os.sep)

def _guard(event, args):
    if event == "open":
        target, mode = args[0], args[1] or "r"
        if target is None or isinstance(target, int):
            return
        if any(flag in mode for flag in "wax+") and not _inside(target):
            raise PermissionError(f"sandbox violation: write outside sandbox: {target!r}")
    elif event in ("os.remove", "os.rename", "os.mkdir", "os.rmdir", "shutil.rmtree"):
        for target in args:
            if isinstance(target, (str, bytes, os.PathLike)) and not _inside(target):
                raise PermissionError(f"sandbox violation: {event} outside sandbox: {target!r}")

with open(code_path, encoding="utf-8") as fh:
    source = fh.read()

sys.addaudithook(_guard)
namespace = {"__name__": "__main__", "__file__": code_path}
exec(compile(source, code_path, "exec"), namespace)

if not os.path.exists(output_path) and "matplotlib" in sys.modules:
    import matplotlib.pyplot as plt

    if plt.get_fignums():
        plt.savefig(output_path)
"""


@dataclass(frozen=True)
class ExecResult:
    status: str  # "ok" | "error" | "timeout"
    duration_ms: int
    image_path: str = ""
    error_text: str = ""


def _child_env(sandbox: Path) -> dict[str, str]:
    scratch = sandbox / ".scratch"
    scratch.mkdir(exist_ok=True)
    env = dict(os.environ)
    env["MPLBACKEND"] = "Agg"
    # Keep library caches and temp files inside the sandbox so the write
    # guard never trips on plumbing the script did not ask for.
    env["MPLCONFIGDIR"] = str(scratch)
    env["TMPDIR"] = str(scratch)
    env["PYTHONDONTWRITEBYTECODE"] = "1"
    return env


def run_code(code: str, timeout_ms: int, output_path: str | Path, sandbox_root: str | Path) -> ExecResult:
    sandbox = Path(sandbox_root).resolve()
    output = Path(output_path)
    started = time.monotonic()

    def elapsed_ms() -> int:
        return int((time.monotonic() - started) * 1000)

    with tempfile.NamedTemporaryFile(
        "w", suffix=".py", dir=sandbox, delete=False, encoding="utf-8"
    ) as fh:
        fh.write(code)
        code_path = fh.name
    try:
        try:
            proc = subprocess.run(
                [sys.executable, "-c", _BOOTSTRAP, code_path, str(output), str(sandbox)],
                cwd=sandbox,
                env=_child_env(sandbox),
                capture_output=True,
                text=True,
                timeout=timeout_ms / 1000.0,
            )
        except subprocess.TimeoutExpired:
            return ExecResult(status="timeout", duration_ms=elapsed_ms())
    finally:
        os.unlink(code_path)

    duration = elapsed_ms()
    if proc.returncode != 0:
        text = (proc.stderr or proc.stdout or f"exit code {proc.returncode}").strip()
        return ExecResult(status="error", duration_ms=duration, error_text=text[-_MAX_ERROR_CHARS:])
    if not output.is_file():
        return ExecResult(
            status="error",
            duration_ms=duration,
            error_text=f"script produced no image at {output}",
        )
    try:
        with Image.open(output) as img:
            img.verify()
    except (UnidentifiedImageError, OSError) as exc:
        return ExecResult(
            status="error",
            duration_ms=duration,
            error_text=f"output is not a decodable image: {exc}",
        )
    return ExecResult(status="ok", duration_ms=duration, image_path=str(output))
