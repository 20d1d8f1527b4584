"""JSON-over-HTTP clients for the translate / generate / embed backend roles.

The wire protocol is deliberately vendor-neutral so deterministic mocks and
real-model shims are interchangeable:

    POST {base}/v1/translate  {"src", "tgt", "texts", "max_new_tokens", "decoding"}
                              -> {"translations": [str]}
    POST {base}/v1/generate   {"prompt", "max_new_tokens", "decoding"}
                              -> {"completion": str}
    POST {base}/v1/embed      {"tokens": [str]} -> {"vectors": [[float]]}
    GET  {base}/v1/health     -> {"status": "ok", "role": str}

All bodies are UTF-8 JSON; non-2xx responses carry {"error": str}.
"""

from __future__ import annotations

import json
import logging
import random
import threading
import time
from dataclasses import dataclass
from typing import Any, Sequence

import requests

logger = logging.getLogger(__name__)

ROLES = ("translate_fwd", "translate_rev", "generate", "embed")

# exponential backoff between retries
BACKOFF_BASE_S = 0.2
BACKOFF_FACTOR = 2.0
BACKOFF_CAP_S = 5.0

_sleep = time.sleep
_local = threading.local()


class BackendError(RuntimeError):
    """A backend call failed after its retry budget was spent."""

    def __init__(
        self,
        role: str,
        message: str,
        attempts: int = 1,
        status: int | None = None,
        excerpt: str = "",
    ):
        self.role = role
        self.attempts = attempts
        self.status = status
        self.excerpt = excerpt[:200]
        detail = f"[{role}] {message} (attempts={attempts}"
        if status is not None:
            detail += f", status={status}"
        if self.excerpt:
            detail += f", payload={self.excerpt!r}"
        super().__init__(detail + ")")


class ProtocolError(BackendError):
    """The backend answered, but not in the shape the protocol promises."""


@dataclass(frozen=True)
class BackendEndpoint:
    """Where one backend role lives and how patiently we talk to it."""

    role: str
    base_url: str
    timeout: float = 30.0
    max_retries: int = 2
    batch_size: int = 8

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ValueError(f"unknown backend role {self.role!r}")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass(frozen=True)
class DecodingPolicy:
    """Decoding settings sent with every request; only greedy is supported."""

    max_new_tokens: int
    mode: str = "greedy"

    def __post_init__(self) -> None:
        if self.mode != "greedy":
            raise ValueError(f"unsupported decoding mode {self.mode!r}")
        if self.max_new_tokens <= 0:
            raise ValueError("max_new_tokens must be positive")


def encode_body(obj: dict[str, Any]) -> bytes:
    """Canonical request/response encoding: compact UTF-8 JSON, insertion order."""
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":")).encode("utf-8")


def _session() -> requests.Session:
    session = getattr(_local, "session", None)
    if session is None:
        session = requests.Session()
        _local.session = session
    return session


def _backoff(attempt: int) -> None:
    delay = min(BACKOFF_CAP_S, BACKOFF_BASE_S * BACKOFF_FACTOR ** (attempt - 1))
    _sleep(delay * (0.5 + random.random() / 2))


def _request(endpoint: BackendEndpoint, path: str, body: dict[str, Any] | None) -> Any:
    """Issue one protocol call with bounded retries.

    Timeouts, connection failures, and 5xx responses are retried with
    exponential backoff (total attempts <= max_retries + 1); other non-2xx
    statuses and malformed payloads fail immediately.
    """
    url = endpoint.base_url.rstrip("/") + path
    attempts = 0
    while True:
        attempts += 1
        try:
            if body is None:
                resp = _session().get(url, timeout=endpoint.timeout)
            else:
                resp = _session().post(
                    url,
                    data=encode_body(body),
                    headers={"Content-Type": "application/json"},
                    timeout=endpoint.timeout,
                )
        except (requests.Timeout, requests.ConnectionError) as exc:
            if attempts > endpoint.max_retries:
                raise BackendError(
                    endpoint.role, f"{path} unreachable: {exc}", attempts=attempts
                ) from exc
            logger.debug("retrying %s %s after %s", endpoint.role, path, exc)
            _backoff(attempts)
            continue

        if resp.status_code >= 500:
            if attempts > endpoint.max_retries:
                raise BackendError(
                    endpoint.role,
                    f"{path} server error",
                    attempts=attempts,
                    status=resp.status_code,
                    excerpt=resp.text,
                )
            logger.debug("retrying %s %s after status %d", endpoint.role, path, resp.status_code)
            _backoff(attempts)
            continue
        if not 200 <= resp.status_code < 300:
            raise BackendError(
                endpoint.role,
                f"{path} rejected",
                attempts=attempts,
                status=resp.status_code,
                excerpt=resp.text,
            )
        try:
            return resp.json()
        except ValueError as exc:
            raise ProtocolError(
                endpoint.role,
                f"{path} returned malformed JSON",
                attempts=attempts,
                status=resp.status_code,
                excerpt=resp.text,
            ) from exc


def translate(
    endpoint: BackendEndpoint,
    texts: Sequence[str],
    src: str,
    tgt: str,
    policy: DecodingPolicy,
) -> list[str]:
    """Translate already-tagged texts, preserving order.

    Requests are chunked into batches of ``endpoint.batch_size``; each item's
    result must be independent of batch composition, so batching is purely a
    throughput knob.
    """
    if not texts:
        raise ValueError("texts must be non-empty")
    out: list[str] = []
    for start in range(0, len(texts), endpoint.batch_size):
        chunk = list(texts[start : start + endpoint.batch_size])
        data = _request(
            endpoint,
            "/v1/translate",
            {
                "src": src,
                "tgt": tgt,
                "texts": chunk,
                "max_new_tokens": policy.max_new_tokens,
                "decoding": policy.mode,
            },
        )
        translations = data.get("translations") if isinstance(data, dict) else None
        if not isinstance(translations, list) or any(
            not isinstance(t, str) for t in translations
        ):
            raise ProtocolError(endpoint.role, "/v1/translate response missing 'translations'")
        if len(translations) != len(chunk):
            raise ProtocolError(
                endpoint.role,
                f"/v1/translate length mismatch: sent {len(chunk)}, got {len(translations)}",
            )
        out.extend(translations)
    return out


def generate(endpoint: BackendEndpoint, prompt: str, policy: DecodingPolicy) -> str:
    """Run one generation request; the completion may legitimately be empty."""
    if not prompt:
        raise ValueError("prompt must be non-empty")
    data = _request(
        endpoint,
        "/v1/generate",
        {"prompt": prompt, "max_new_tokens": policy.max_new_tokens, "decoding": policy.mode},
    )
    completion = data.get("completion") if isinstance(data, dict) else None
    if not isinstance(completion, str):
        raise ProtocolError(endpoint.role, "/v1/generate response missing 'completion'")
    return completion


def embed(endpoint: BackendEndpoint, tokens: Sequence[str]) -> list[list[float]]:
    """Fetch one fixed-dimension vector per token, order-preserving."""
    if not tokens:
        raise ValueError("tokens must be non-empty")
    vectors: list[list[float]] = []
    for start in range(0, len(tokens), endpoint.batch_size):
        chunk = list(tokens[start : start + endpoint.batch_size])
        data = _request(endpoint, "/v1/embed", {"tokens": chunk})
        batch = data.get("vectors") if isinstance(data, dict) else None
        if not isinstance(batch, list) or len(batch) != len(chunk):
            raise ProtocolError(
                endpoint.role,
                f"/v1/embed length mismatch: sent {len(chunk)}, got "
                f"{len(batch) if isinstance(batch, list) else 'non-list'}",
            )
        vectors.extend([list(map(float, vec)) for vec in batch])
    dims = {len(v) for v in vectors}
    if len(dims) > 1:
        raise ProtocolError(endpoint.role, f"inconsistent vector dimensions: {sorted(dims)}")
    return vectors


def health(endpoint: BackendEndpoint) -> dict[str, Any]:
    """GET the backend's health descriptor ({"status": "ok", "role": ...})."""
    data = _request(endpoint, "/v1/health", None)
    if not isinstance(data, dict) or data.get("status") != "ok":
        raise ProtocolError(endpoint.role, f"unhealthy backend: {data!r}")
    return data
