import base64
import json
import subprocess
import sys

import pytest

# Tiny valid 4x3 PNG; scripts that write it directly keep protocol tests
# fast because they never import matplotlib.
TINY_PNG = base64.b64decode(
    "iVBORw0KGgoAAAANSUhEUgAAAAQAAAADCAIAAAA7ljmRAAAAFElEQVR4nGP88OE/"
    "AwwwMSABFA4AasgC5cxmd3EAAAAASUVORK5CYII="
)

BAR_SCRIPT = """\
import matplotlib.pyplot as plt

fig, ax = plt.subplots(figsize=(4, 3))
ax.bar(["a", "b", "c"], [3, 1, 2])
ax.set_title("toy")
fig.savefig({out!r})
"""


def bar_script(out_path) -> str:
    return BAR_SCRIPT.format(out=str(out_path))


def tiny_png_script(out_path) -> str:
    return (
        f"import base64\n"
        f"data = base64.b64decode({base64.b64encode(TINY_PNG).decode()!r})\n"
        f"open({str(out_path)!r}, 'wb').write(data)\n"
    )


@pytest.fixture
def sandbox(tmp_path):
    root = tmp_path / "sandbox"
    root.mkdir()
    return root


class ServerSession:
    """Drives a `python -m chartexec <sandbox>` child over its stdio protocol."""

    def __init__(self, sandbox):
        self.proc = subprocess.Popen(
            [sys.executable, "-m", "chartexec", str(sandbox)],
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
        )

    def send_line(self, line: str) -> dict:
        self.proc.stdin.write(line.rstrip("\n") + "\n")
        self.proc.stdin.flush()
        reply = self.proc.stdout.readline()
        assert reply.endswith("\n"), "server must answer with a full line"
        return json.loads(reply)

    def send(self, request: dict) -> dict:
        return self.send_line(json.dumps(request))

    def close(self) -> int:
        self.proc.stdin.close()
        leftover = self.proc.stdout.read()
        self.proc.wait(timeout=10)
        assert leftover == "", "server wrote responses with no matching request"
        return self.proc.returncode


@pytest.fixture
def session(sandbox):
    sess = ServerSession(sandbox)
    yield sess
    if sess.proc.poll() is None:
        sess.proc.kill()
        sess.proc.wait()
