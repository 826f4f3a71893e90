"""Shared fixtures: synthetic frames, a local HTTP stub, suite timing."""

from __future__ import annotations

import json
import threading
import time
from contextlib import contextmanager
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest

from tifre.video_io import Frame

_SUITE_T0 = time.perf_counter()
SUITE_BUDGET_SEC = 120.0

# One "ACCEPTANCE <n> PASS/FAIL: ..." line per criterion, emitted at session
# end so they survive pytest's output capture.
ACCEPTANCE_LINES: list[str] = []


def suite_elapsed() -> float:
    return time.perf_counter() - _SUITE_T0


def record_acceptance(criterion: int, passed: bool, detail: str) -> None:
    line = f"ACCEPTANCE {criterion} {'PASS' if passed else 'FAIL'}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_sessionfinish(session, exitstatus):
    elapsed = suite_elapsed()
    verdict = "PASS" if elapsed < SUITE_BUDGET_SEC else "FAIL"
    ACCEPTANCE_LINES.append(
        f"ACCEPTANCE 10 {verdict}: full suite wall time {elapsed:.1f}s (budget {SUITE_BUDGET_SEC:.0f}s)"
    )
    reporter = session.config.pluginmanager.get_plugin("terminalreporter")
    for line in ACCEPTANCE_LINES:
        if reporter is not None:
            reporter.write_line(line)
        else:
            print(line)


def make_frames(n: int, side: int = 8, seed: int = 0, source: str = "test") -> list[Frame]:
    """n distinct random frames at side x side."""
    rng = np.random.default_rng(seed)
    return [
        Frame(
            index=i,
            timestamp_sec=float(i),
            pixels=rng.integers(0, 256, (side, side, 3), dtype=np.uint8),
            source_id=source,
        )
        for i in range(n)
    ]


@pytest.fixture
def frames_dir(tmp_path):
    """Directory of 12 small numbered PNGs; returns (path, count, side)."""
    from PIL import Image

    src = tmp_path / "frames"
    src.mkdir()
    rng = np.random.default_rng(42)
    for i in range(12):
        Image.fromarray(rng.integers(0, 256, (16, 16, 3), dtype=np.uint8)).save(
            src / f"frame_{i:03d}.png"
        )
    return src


@contextmanager
def http_stub(handler):
    """Serve `handler(path, payload) -> (status, response_dict)` on localhost.

    Yields the base URL. The handler sees each POST's parsed JSON body;
    non-dict responses are sent as raw bytes with the given status.
    """

    class _Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            length = int(self.headers.get("Content-Length", 0))
            payload = json.loads(self.rfile.read(length)) if length else {}
            status, response = handler(self.path, payload)
            body = (
                json.dumps(response).encode()
                if isinstance(response, (dict, list))
                else response
            )
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def log_message(self, *args):
            pass

    server = ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield f"http://127.0.0.1:{server.server_port}"
    finally:
        server.shutdown()
        server.server_close()
        thread.join(timeout=5)
