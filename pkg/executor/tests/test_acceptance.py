"""Acceptance gate for the executor service.

One test per criterion; each prints a single PASS line on success.
"""

from pathlib import Path

from conftest import bar_script, tiny_png_script


def report(line: str) -> None:
    print(f"PASS: {line}")


def test_executor_protocol(sandbox, session, tmp_path):
    def request(id, code, out, timeout_ms=30_000):
        return {"id": id, "code": code, "timeout_ms": timeout_ms, "output_path": str(out)}

    # Triple case: ok / error / timeout in one session.
    ok = session.send(request("t-ok", bar_script(sandbox / "ok.png"), sandbox / "ok.png"))
    err = session.send(request("t-err", "raise RuntimeError('boom')\n", sandbox / "err.png"))
    out = session.send(request("t-to", "while True: pass\n", sandbox / "to.png", 2_000))
    assert ok["status"] == "ok" and Path(ok["image_path"]).stat().st_size >= 1024
    assert err["status"] == "error" and "boom" in err["error_text"]
    # Timeout enforced within +1 s grace.
    assert out["status"] == "timeout"
    assert 2_000 <= out["duration_ms"] <= 3_000

    # One response per request and ordering over a 100-request session
    # (3 requests already in flight above).
    ids = [f"t-{i:03d}" for i in range(97)]
    replies = []
    for i, id in enumerate(ids):
        img = sandbox / f"t_{i:03d}.png"
        replies.append(session.send(request(id, tiny_png_script(img), img)))
    assert [r["id"] for r in replies] == ids
    assert all(r["status"] == "ok" for r in replies)

    # Sandbox escape fails closed.
    target = tmp_path / "escape.txt"
    esc = session.send(
        request("t-esc", f"open({str(target)!r}, 'w').write('pwned')\n", sandbox / "esc.png")
    )
    assert esc["status"] == "error"
    assert "sandbox violation" in esc["error_text"]
    assert not target.exists()

    assert session.close() == 0
    report(
        "executor protocol: ok/error/timeout triple case; timeout within +1 s grace; "
        "100-request session kept one-response-per-request ordering; sandbox escape failed closed"
    )
