"""Sandboxed plot-script execution service."""

from .runner import ExecResult, GRACE_MS, run_code
from .server import handle_line, main, serve

__version__ = "0.1.0"

__all__ = [
    "ExecResult",
    "GRACE_MS",
    "run_code",
    "handle_line",
    "serve",
    "main",
]
