"""End-to-end checks of the `serve` subcommand over a real socket."""

import json
import shutil
import signal
import socket
import subprocess
import sys
import threading
import time
from pathlib import Path

import pytest
import requests

REPO = Path(__file__).resolve().parent.parent


def free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


@pytest.fixture
def server(tmp_path):
    shutil.copy(REPO / "data" / "houses.csv", tmp_path / "houses.csv")
    shutil.copy(REPO / "data" / "houses_schema.json", tmp_path / "houses_schema.json")
    port = free_port()
    proc = subprocess.Popen(
        [
            sys.executable, "-m", "comparables.cli", "serve",
            "--dataset", "houses.csv", "--schema", "houses_schema.json",
            "--predictor", "knn:k=3", "--port", str(port), "--max-epochs", "2000",
        ],
        cwd=tmp_path,
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
    )
    base = f"http://127.0.0.1:{port}"
    for _ in range(100):
        try:
            if requests.get(f"{base}/health", timeout=0.3).status_code == 200:
                break
        except requests.RequestException:
            time.sleep(0.1)
    else:
        proc.kill()
        raise RuntimeError("server did not come up")
    yield proc, base
    if proc.poll() is None:
        proc.kill()
        proc.wait(timeout=5)


def test_health_and_explain_roundtrip(server):
    proc, base = server
    assert requests.get(f"{base}/health", timeout=2).json() == {"status": "ok"}
    res = requests.post(
        f"{base}/explain",
        json={"dataset": "default", "subject": "0", "method": "comparables", "k": 2},
        timeout=10,
    )
    assert res.status_code == 200
    assert res.headers["X-CXAI-Version"] == "1"
    doc = res.json()
    assert doc["estimate"]["approximate"] is True


def test_sigint_completes_inflight_requests(server):
    # a trace explanation is slow enough to still be running when SIGINT lands
    proc, base = server
    result = {}

    def slow_request():
        res = requests.post(
            f"{base}/explain",
            json={"dataset": "default", "subject": "3", "method": "trace", "k": 2, "seed": 1},
            timeout=60,
        )
        result["status"] = res.status_code
        result["body"] = res.content

    thread = threading.Thread(target=slow_request)
    thread.start()
    time.sleep(0.4)  # request in flight, trace still training
    proc.send_signal(signal.SIGINT)
    thread.join(timeout=60)
    assert result.get("status") == 200, "in-flight request was dropped on SIGINT"
    assert len(result["body"]) > 0
    assert proc.wait(timeout=30) == 0
