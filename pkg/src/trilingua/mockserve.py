"""Deterministic in-process backend servers for tests and demos.

One server implements all four protocol endpoints with configurable,
repeatable behavior: identity/tagging/dictionary translators, echo or
fixed-map generators, a seeded hash embedder, and a deterministic fault
plan. Every protocol request lands in an ordered call log.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import threading
import time
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any, Mapping

from trilingua.client import encode_body

logger = logging.getLogger(__name__)

TRANSLATORS = ("identity", "tag_prefix", "dictionary")
GENERATORS = ("echo", "fixed")
FAULT_KINDS = ("error", "malformed", "length_mismatch", "close")

_EMBED_SEED = b"trilingua-mock-embed-v1\x00"


class _InjectedDisconnect(Exception):
    """Raised inside a handler to drop the connection without a response."""


@dataclass(frozen=True)
class MockBehavior:
    """Fully determines the mock's responses for a given request sequence."""

    translator: str = "identity"
    dictionary: Mapping[str, str] = field(default_factory=dict)
    generator: str = "echo"
    fixed: Mapping[str, str] = field(default_factory=dict)
    embed_dim: int = 32
    role: str = "mock"
    fault_plan: Mapping[int, str] = field(default_factory=dict)
    delay: float = 0.0

    def __post_init__(self) -> None:
        if self.translator not in TRANSLATORS:
            raise ValueError(f"unknown translator {self.translator!r}")
        if self.generator not in GENERATORS:
            raise ValueError(f"unknown generator {self.generator!r}")
        if self.embed_dim < 1:
            raise ValueError("embed_dim must be >= 1")
        for index, kind in self.fault_plan.items():
            if kind not in FAULT_KINDS:
                raise ValueError(f"unknown fault kind {kind!r} at call {index}")


@dataclass(frozen=True)
class CallRecord:
    """One logged protocol request."""

    index: int
    method: str
    path: str
    body: bytes

    def json(self) -> Any:
        return json.loads(self.body) if self.body else None


def strip_language_tag(text: str) -> str:
    """Remove a leading ``<2xx>``-style tag, if present."""
    if text.startswith("<2"):
        close = text.find(">")
        if close > 1:
            return text[close + 1 :].lstrip(" ")
    return text


def mock_translate(behavior: MockBehavior, text: str, src: str, tgt: str) -> str:
    payload = strip_language_tag(text)
    if behavior.translator == "identity":
        return payload
    if behavior.translator == "tag_prefix":
        return f"[{src}→{tgt}] {payload}"
    return behavior.dictionary.get(payload, payload)


def mock_generate(behavior: MockBehavior, prompt: str) -> str:
    if behavior.generator == "echo":
        return prompt
    digest = hashlib.sha256(prompt.encode("utf-8")).hexdigest()
    return behavior.fixed.get(digest, "")


def token_vector(token: str, dim: int) -> list[float]:
    """Unit vector for a token, derived from a seeded hash of its bytes.

    Stable across processes and restarts; identical tokens always map to
    identical vectors.
    """
    raw = hashlib.shake_256(_EMBED_SEED + token.encode("utf-8")).digest(dim * 2)
    values = []
    for i in range(dim):
        word = int.from_bytes(raw[2 * i : 2 * i + 2], "big")
        values.append(word / 65535.0 * 2.0 - 1.0)
    norm = math.sqrt(sum(v * v for v in values))
    if norm < 1e-12:
        values[0] = 1.0
        norm = 1.0
    return [v / norm for v in values]


class _MockHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server: "_MockHTTPServer"

    def log_message(self, fmt: str, *args: Any) -> None:
        logger.debug("mock %s", fmt % args)

    def _read_body(self) -> bytes:
        length = int(self.headers.get("Content-Length", 0))
        return self.rfile.read(length) if length else b""

    def _send(self, status: int, payload: bytes) -> None:
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def _send_json(self, status: int, obj: dict[str, Any]) -> None:
        self._send(status, encode_body(obj))

    def _record_call(self, body: bytes) -> str | None:
        """Log the request and return the fault to inject, if any."""
        with self.server.lock:
            index = len(self.server.call_log)
            self.server.call_log.append(
                CallRecord(index=index, method=self.command, path=self.path, body=body)
            )
        return self.server.behavior.fault_plan.get(index)

    def _apply_common_fault(self, fault: str | None) -> bool:
        """Handle faults shared by all endpoints; True when already responded."""
        if fault == "close":
            raise _InjectedDisconnect()
        if fault == "error":
            self._send_json(500, {"error": "injected failure"})
            return True
        if fault == "malformed":
            self._send(200, b"{not json")
            return True
        return False

    def do_GET(self) -> None:
        if self.path == "/__mock__/calls":
            calls = [
                {
                    "index": c.index,
                    "method": c.method,
                    "path": c.path,
                    "body": c.body.decode("utf-8", errors="replace"),
                }
                for c in self.server.snapshot_calls()
            ]
            self._send(200, json.dumps(calls, ensure_ascii=False).encode("utf-8"))
            return
        if self.path != "/v1/health":
            self._send_json(404, {"error": f"unknown path {self.path}"})
            return
        behavior = self.server.behavior
        if behavior.delay:
            time.sleep(behavior.delay)
        fault = self._record_call(b"")
        if self._apply_common_fault(fault):
            return
        self._send_json(200, {"status": "ok", "role": behavior.role})

    def do_POST(self) -> None:
        behavior = self.server.behavior
        body = self._read_body()
        if self.path not in ("/v1/translate", "/v1/generate", "/v1/embed"):
            self._send_json(404, {"error": f"unknown path {self.path}"})
            return
        if behavior.delay:
            time.sleep(behavior.delay)
        fault = self._record_call(body)
        if self._apply_common_fault(fault):
            return
        try:
            obj = json.loads(body)
        except ValueError:
            self._send_json(400, {"error": "request body is not valid JSON"})
            return

        if self.path == "/v1/translate":
            texts = obj.get("texts")
            if not isinstance(texts, list):
                self._send_json(400, {"error": "missing 'texts'"})
                return
            translations = [
                mock_translate(behavior, t, obj.get("src", "?"), obj.get("tgt", "?"))
                for t in texts
            ]
            if fault == "length_mismatch" and translations:
                translations = translations[:-1]
            self._send_json(200, {"translations": translations})
        elif self.path == "/v1/generate":
            prompt = obj.get("prompt")
            if not isinstance(prompt, str):
                self._send_json(400, {"error": "missing 'prompt'"})
                return
            self._send_json(200, {"completion": mock_generate(behavior, prompt)})
        else:
            tokens = obj.get("tokens")
            if not isinstance(tokens, list):
                self._send_json(400, {"error": "missing 'tokens'"})
                return
            vectors = [token_vector(t, behavior.embed_dim) for t in tokens]
            self._send_json(200, {"vectors": vectors})


class _MockHTTPServer(ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, address: tuple[str, int], behavior: MockBehavior):
        super().__init__(address, _MockHandler)
        self.behavior = behavior
        self.call_log: list[CallRecord] = []
        self.lock = threading.Lock()

    def snapshot_calls(self) -> list[CallRecord]:
        with self.lock:
            return list(self.call_log)

    def handle_error(self, request: Any, client_address: Any) -> None:  # noqa: D401
        import sys

        exc = sys.exc_info()[1]
        if isinstance(exc, (_InjectedDisconnect, ConnectionError)):
            return
        super().handle_error(request, client_address)


class MockServer:
    """Handle on a running mock: base URL, call log, graceful shutdown."""

    def __init__(self, behavior: MockBehavior, port: int = 0, host: str = "127.0.0.1"):
        self._httpd = _MockHTTPServer((host, port), behavior)
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()

    @property
    def behavior(self) -> MockBehavior:
        return self._httpd.behavior

    @property
    def port(self) -> int:
        return self._httpd.server_address[1]

    @property
    def base_url(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    @property
    def call_log(self) -> list[CallRecord]:
        return self._httpd.snapshot_calls()

    def calls(self, path: str | None = None) -> list[CallRecord]:
        log = self._httpd.snapshot_calls()
        if path is None:
            return log
        return [c for c in log if c.path == path]

    def shutdown(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        self._thread.join(timeout=5)

    def __enter__(self) -> "MockServer":
        return self

    def __exit__(self, *exc: Any) -> None:
        self.shutdown()


def serve_mock(behavior: MockBehavior, port: int = 0) -> MockServer:
    """Start a mock backend on ``port`` (0 picks a free one) and return its handle."""
    return MockServer(behavior, port=port)
