"""Shared fixtures: sample images, scripted fixture recording, a local stub
LLM/vision HTTP server, and a no-outbound-network guard."""

from __future__ import annotations

import io
import json
import socket
import sys
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

REPO_ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO_ROOT))

from medchat.llm import FixtureStore, RecordTransport  # noqa: E402
from medchat.vision import FundusImage  # noqa: E402
from tools.generate_fixtures import generate_case_fixtures  # noqa: E402
from tools.scripted_llm import ScriptedTransport, scripted_completion  # noqa: E402


def make_png(width: int = 200, height: int = 200, seed: int = 7) -> bytes:
    rng = np.random.default_rng(seed)
    pixels = rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8)
    buf = io.BytesIO()
    Image.fromarray(pixels, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def make_jpeg(width: int = 64, height: int = 64) -> bytes:
    buf = io.BytesIO()
    Image.new("RGB", (width, height), (120, 60, 30)).save(buf, format="JPEG")
    return buf.getvalue()


def solid_png(width: int, height: int, color=(255, 255, 255)) -> bytes:
    buf = io.BytesIO()
    Image.new("RGB", (width, height), color).save(buf, format="PNG")
    return buf.getvalue()


@pytest.fixture
def fundus_image() -> FundusImage:
    return FundusImage.from_bytes(make_png())


@pytest.fixture
def scripted_transport() -> ScriptedTransport:
    return ScriptedTransport()


def record_scripted(fixture_dir: Path, messages: list[dict], model="gpt-4.1", temperature=0.0) -> str:
    """Record one scripted completion for an exact message list."""
    transport = RecordTransport(
        ScriptedTransport(), FixtureStore(fixture_dir), model, temperature
    )
    return transport.complete(messages)


@pytest.fixture
def no_network(monkeypatch):
    """Fail the test on any attempted socket connection."""

    def guard(self, *args, **kwargs):
        raise AssertionError(f"outbound network connection attempted: {args}")

    monkeypatch.setattr(socket.socket, "connect", guard)
    monkeypatch.setattr(socket.socket, "connect_ex", guard)
    return None


class _StubHandler(BaseHTTPRequestHandler):
    """Local chat-completions + vision inference endpoints for LIVE tests."""

    server_version = "stub/1"

    def log_message(self, fmt, *args):  # quiet
        pass

    def _read_body(self) -> bytes:
        length = int(self.headers.get("Content-Length", "0"))
        return self.rfile.read(length)

    def do_POST(self):  # noqa: N802 (http.server API)
        state = self.server.state  # type: ignore[attr-defined]
        state["requests"].append(
            {
                "path": self.path,
                "headers": dict(self.headers),
                "body": self._read_body(),
            }
        )
        if state["fail_next"] > 0:
            state["fail_next"] -= 1
            self.send_response(503)
            self.end_headers()
            return
        if self.path == "/v1/chat/completions":
            payload = json.loads(state["requests"][-1]["body"])
            content = scripted_completion(payload["messages"])
            body = json.dumps(
                {"choices": [{"message": {"role": "assistant", "content": content}}]}
            ).encode()
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)
        elif self.path == "/classify":
            body = json.dumps({"probability": state["probability"]}).encode()
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)
        elif self.path == "/segment":
            from medchat.vision import SegmentationMap, encode_map_png

            if state["segment_size"] is not None:
                width, height = state["segment_size"]
            else:
                with Image.open(io.BytesIO(state["requests"][-1]["body"])) as im:
                    width, height = im.width, im.height
            labels = bytearray(width * height)
            labels[0 : min(10, len(labels))] = b"\x02" * min(10, len(labels))
            labels[10 : min(40, len(labels))] = b"\x01" * max(
                0, min(40, len(labels)) - 10
            )
            body = encode_map_png(
                SegmentationMap(width=width, height=height, labels=bytes(labels))
            )
            self.send_response(200)
            self.send_header("Content-Type", "image/png")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)
        else:
            self.send_response(404)
            self.end_headers()


@pytest.fixture
def stub_server():
    """(base_url, state) for a throwaway local model server."""
    server = ThreadingHTTPServer(("127.0.0.1", 0), _StubHandler)
    server.state = {  # type: ignore[attr-defined]
        "requests": [],
        "fail_next": 0,
        "probability": 0.62,
        "segment_size": None,
    }
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    base_url = f"http://127.0.0.1:{server.server_address[1]}"
    try:
        yield base_url, server.state  # type: ignore[attr-defined]
    finally:
        server.shutdown()
        thread.join(timeout=5)


__all__ = [
    "generate_case_fixtures",
    "make_png",
    "make_jpeg",
    "record_scripted",
    "solid_png",
]
