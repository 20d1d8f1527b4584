"""HTTP server exposing loaded checkpoints over the backend wire protocol.

Routes:
    POST {base}/v1/translate  {"src","tgt","texts","max_new_tokens","decoding"} -> {"translations"}
    POST {base}/v1/generate   {"prompt","max_new_tokens","decoding"}            -> {"completion"}
    POST {base}/v1/embed      {"tokens"}                                         -> {"vectors"}
    GET  {base}/v1/health     -> {"status":"ok","role":...,"models":{role: id}}
    GET  {base}/__shim__/last -> most recent inference record (audit aid)

Translation requests are routed by target language: English targets go to the
forward model, everything else to the reverse model. Only greedy decoding is
accepted. Errors carry {"error": str}; out-of-memory maps to 503 so callers
may retry, other inference failures to 500.
"""

from __future__ import annotations

import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any

import torch

from .backends import load_backend
from .config import ShimConfig

logger = logging.getLogger(__name__)

_OOM_ERRORS: tuple[type[BaseException], ...] = tuple(
    exc for exc in (getattr(torch, "OutOfMemoryError", None), getattr(torch.cuda, "OutOfMemoryError", None)) if exc
) or (MemoryError,)


def _encode_json(obj: Any) -> bytes:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":")).encode("utf-8")


def _positive_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool) and value > 0


def _string_list(value: Any) -> bool:
    return isinstance(value, list) and bool(value) and all(isinstance(v, str) for v in value)


class _RequestRejected(ValueError):
    """Invalid request payload; message goes back verbatim as a 400."""


class _ShimHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server: "_ShimHTTPServer"

    def log_message(self, fmt: str, *args: Any) -> None:
        logger.debug("shim %s", fmt % args)

    def _read_body(self) -> bytes:
        length = int(self.headers.get("Content-Length", 0))
        return self.rfile.read(length) if length else b""

    def _send_json(self, status: int, obj: Any) -> None:
        payload = _encode_json(obj)
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def _backend(self, role: str) -> Any:
        backend = self.server.backends.get(role)
        if backend is None:
            raise _RequestRejected(f"no model serves role {role!r}")
        return backend

    def _record_last(self, role: str, info: dict[str, Any]) -> None:
        record = {"path": self.path, "role": role, **info}
        with self.server.lock:
            self.server.last = record

    def do_GET(self) -> None:
        if self.path == "/v1/health":
            self._send_json(200, self.server.health_payload())
            return
        if self.path == "/__shim__/last":
            with self.server.lock:
                last = self.server.last
            if last is None:
                self._send_json(404, {"error": "no inference recorded"})
            else:
                self._send_json(200, last)
            return
        self._send_json(404, {"error": f"unknown path {self.path}"})

    def do_POST(self) -> None:
        if self.path not in ("/v1/translate", "/v1/generate", "/v1/embed"):
            self._send_json(404, {"error": f"unknown path {self.path}"})
            return
        try:
            obj = json.loads(self._read_body())
        except ValueError:
            self._send_json(400, {"error": "request body is not valid JSON"})
            return
        if not isinstance(obj, dict):
            self._send_json(400, {"error": "request body must be a JSON object"})
            return
        try:
            if self.path == "/v1/translate":
                self._handle_translate(obj)
            elif self.path == "/v1/generate":
                self._handle_generate(obj)
            else:
                self._handle_embed(obj)
        except _RequestRejected as exc:
            self._send_json(400, {"error": str(exc)})
        except _OOM_ERRORS as exc:
            logger.warning("out of memory on %s: %s", self.path, exc)
            self._send_json(503, {"error": f"out of memory: {exc}"})
        except Exception as exc:
            logger.exception("inference failed on %s", self.path)
            self._send_json(500, {"error": f"inference failed: {exc}"})

    @staticmethod
    def _check_decoding(obj: dict[str, Any]) -> None:
        if obj.get("decoding") != "greedy":
            raise _RequestRejected("only greedy decoding is supported")

    def _handle_translate(self, obj: dict[str, Any]) -> None:
        src, tgt = obj.get("src"), obj.get("tgt")
        if not isinstance(src, str) or not src or not isinstance(tgt, str) or not tgt:
            raise _RequestRejected("missing 'src' or 'tgt'")
        if not _string_list(obj.get("texts")):
            raise _RequestRejected("'texts' must be a non-empty list of strings")
        if not _positive_int(obj.get("max_new_tokens")):
            raise _RequestRejected("'max_new_tokens' must be a positive integer")
        self._check_decoding(obj)
        role = "translate_fwd" if tgt == "en" else "translate_rev"
        backend = self._backend(role)
        translations, info = backend.translate(obj["texts"], obj["max_new_tokens"])
        self._record_last(role, {**info, "src": src, "tgt": tgt, "texts": len(translations)})
        self._send_json(200, {"translations": translations})

    def _handle_generate(self, obj: dict[str, Any]) -> None:
        prompt = obj.get("prompt")
        if not isinstance(prompt, str) or not prompt:
            raise _RequestRejected("'prompt' must be a non-empty string")
        if not _positive_int(obj.get("max_new_tokens")):
            raise _RequestRejected("'max_new_tokens' must be a positive integer")
        self._check_decoding(obj)
        backend = self._backend("generate")
        completion, info = backend.generate(prompt, obj["max_new_tokens"])
        self._record_last("generate", info)
        self._send_json(200, {"completion": completion})

    def _handle_embed(self, obj: dict[str, Any]) -> None:
        if not _string_list(obj.get("tokens")):
            raise _RequestRejected("'tokens' must be a non-empty list of strings")
        backend = self._backend("embed")
        vectors, info = backend.embed(obj["tokens"])
        self._record_last("embed", {**info, "tokens": len(vectors)})
        self._send_json(200, {"vectors": vectors})


class _ShimHTTPServer(ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, address: tuple[str, int], backends: dict[str, Any]):
        super().__init__(address, _ShimHandler)
        self.backends = backends
        self.last: dict[str, Any] | None = None
        self.lock = threading.Lock()

    def health_payload(self) -> dict[str, Any]:
        roles = sorted(self.backends)
        role = roles[0] if len(roles) == 1 else "shim"
        return {
            "status": "ok",
            "role": role,
            "models": {r: self.backends[r].model_id for r in roles},
        }

    def handle_error(self, request: Any, client_address: Any) -> None:
        import sys

        exc = sys.exc_info()[1]
        if isinstance(exc, ConnectionError):
            return
        super().handle_error(request, client_address)


class ShimServer:
    """Handle on a running shim: base URL, loaded backends, graceful shutdown."""

    def __init__(self, backends: dict[str, Any], port: int = 0, host: str = "127.0.0.1"):
        self._httpd = _ShimHTTPServer((host, port), backends)
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()

    @property
    def backends(self) -> dict[str, Any]:
        return self._httpd.backends

    @property
    def port(self) -> int:
        return self._httpd.server_address[1]

    @property
    def base_url(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    @property
    def last(self) -> dict[str, Any] | None:
        with self._httpd.lock:
            return self._httpd.last

    def shutdown(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        self._thread.join(timeout=5)

    def __enter__(self) -> "ShimServer":
        return self

    def __exit__(self, *exc: Any) -> None:
        self.shutdown()


def serve_models(config: ShimConfig, port: int | None = None) -> ShimServer:
    """Load every configured checkpoint, then serve them on one HTTP port.

    Loading happens before the socket opens so a bad checkpoint fails fast
    instead of surfacing as request errors. ``port`` overrides the config
    (0 picks a free one).
    """
    backends = {
        role: load_backend(role, spec, config.device) for role, spec in sorted(config.models.items())
    }
    return ShimServer(backends, port=config.port if port is None else port)
