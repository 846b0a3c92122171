"""Line-delimited JSON protocol server.

Reads one request object per stdin line and writes exactly one response
object per stdout line, in request order.  A malformed line never kills
the server: it is answered with a status "error" response whose id is
"unknown".  The process is started with the sandbox root as its sole
argument and exits cleanly at end of input.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path
from typing import TextIO

from .runner import run_code

UNKNOWN_ID = "unknown"


def _response(id: str, result_status: str, duration_ms: int = 0, **extra) -> dict:
    resp = {"id": id, "status": result_status, "duration_ms": duration_ms}
    resp.update(extra)
    return resp


def _error(id: str, text: str, duration_ms: int = 0) -> dict:
    return _response(id, "error", duration_ms, error_text=text)


def _within(path: Path, sandbox: Path) -> bool:
    resolved = path.resolve()
    return resolved == sandbox or sandbox in resolved.parents


def handle_line(line: str, sandbox: Path) -> dict:
    """Produce the response object for one request line."""
    try:
        request = json.loads(line)
    except json.JSONDecodeError as exc:
        return _error(UNKNOWN_ID, f"malformed request line: {exc}")
    if not isinstance(request, dict):
        return _error(UNKNOWN_ID, "request must be a JSON object")

    id = request.get("id")
    if not isinstance(id, str) or not id:
        return _error(UNKNOWN_ID, "request is missing a string id")
    code = request.get("code")
    if not isinstance(code, str):
        return _error(id, "request field 'code' must be a string")
    timeout_ms = request.get("timeout_ms")
    if not isinstance(timeout_ms, int) or isinstance(timeout_ms, bool) or timeout_ms <= 0:
        return _error(id, "request field 'timeout_ms' must be a positive integer")
    output_path = request.get("output_path")
    if not isinstance(output_path, str) or not output_path:
        return _error(id, "request field 'output_path' must be a non-empty path")
    output = Path(output_path)
    if not output.is_absolute():
        output = sandbox / output
    if not _within(output, sandbox):
        return _error(id, f"output_path {output_path!r} is outside the sandbox")

    result = run_code(code, timeout_ms, output, sandbox)
    if result.status == "ok":
        return _response(id, "ok", result.duration_ms, image_path=result.image_path)
    if result.status == "timeout":
        return _response(id, "timeout", result.duration_ms)
    return _error(id, result.error_text, result.duration_ms)


def serve(stdin: TextIO, stdout: TextIO, sandbox_root: str | Path) -> None:
    sandbox = Path(sandbox_root).resolve()
    sandbox.mkdir(parents=True, exist_ok=True)
    for line in stdin:
        if not line.strip():
            continue
        response = handle_line(line, sandbox)
        stdout.write(json.dumps(response) + "\n")
        stdout.flush()


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 1:
        print("usage: chartexec <sandbox_root>", file=sys.stderr)
        return 2
    serve(sys.stdin, sys.stdout, argv[0])
    return 0


if __name__ == "__main__":
    sys.exit(main())
