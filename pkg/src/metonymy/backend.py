"""Chat-completion backends: live HTTP, scripted stand-in, and a record/replay cache.

Every backend implements ``complete(ChatRequest) -> ChatResponse``. Requests
hash to a stable 256-bit key over everything that influences sampling, which
the cache uses as its filename and error messages use as the request id.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import requests

log = logging.getLogger(__name__)

ROLES = ("system", "user", "assistant")
SOURCES = ("live", "replay", "scripted")

DEFAULT_MAX_ATTEMPTS = 5
DEFAULT_BACKOFF_START = 1.0
DEFAULT_TIMEOUT = 120.0
DEFAULT_MAX_IN_FLIGHT = 8


class BackendError(RuntimeError):
    """A completion failed for good; carries the request key for resumption."""

    def __init__(self, message: str, request_key: str | None = None) -> None:
        if request_key:
            message = f"[request {request_key[:12]}] {message}"
        super().__init__(message)
        self.request_key = request_key


@dataclass(frozen=True)
class ChatRequest:
    """One chat completion call. ``vote_index`` distinguishes repeated samples."""

    model: str
    messages: tuple[tuple[str, str], ...]
    temperature: float = 0.6
    top_p: float = 1.0
    max_tokens: int = 1024
    vote_index: int = 0

    def __post_init__(self) -> None:
        if not self.model:
            raise ValueError("model must be non-empty")
        if not self.messages:
            raise ValueError("messages must be non-empty")
        for role, content in self.messages:
            if role not in ROLES:
                raise ValueError(f"unknown message role {role!r}")
            if not isinstance(content, str):
                raise ValueError("message content must be a string")
        if self.messages[-1][0] != "user":
            raise ValueError("last message must have role 'user'")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature {self.temperature} outside [0, 2]")
        if not 0.0 < self.top_p <= 1.0:
            raise ValueError(f"top_p {self.top_p} outside (0, 1]")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")
        if self.vote_index < 0:
            raise ValueError("vote_index must be >= 0")

    def cache_key(self) -> str:
        payload = {
            "model": self.model,
            "messages": [[role, content] for role, content in self.messages],
            "temperature": self.temperature,
            "top_p": self.top_p,
            "max_tokens": self.max_tokens,
            "vote_index": self.vote_index,
        }
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def to_dict(self) -> dict[str, Any]:
        return {
            "model": self.model,
            "messages": [{"role": r, "content": c} for r, c in self.messages],
            "temperature": self.temperature,
            "top_p": self.top_p,
            "max_tokens": self.max_tokens,
            "vote_index": self.vote_index,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ChatRequest":
        return cls(
            model=d["model"],
            messages=tuple((m["role"], m["content"]) for m in d["messages"]),
            temperature=d["temperature"],
            top_p=d["top_p"],
            max_tokens=d["max_tokens"],
            vote_index=d.get("vote_index", 0),
        )


@dataclass(frozen=True)
class ChatResponse:
    text: str
    truncated: bool = False
    latency: float = 0.0
    source: str = "live"

    def __post_init__(self) -> None:
        if self.source not in SOURCES:
            raise ValueError(f"unknown response source {self.source!r}")


class Backend:
    """Interface: turn a ChatRequest into a ChatResponse."""

    def complete(self, request: ChatRequest) -> ChatResponse:
        raise NotImplementedError


class HttpBackend(Backend):
    """OpenAI-compatible chat-completions endpoint over HTTP POST.

    Retries timeouts, 429s, and 5xx responses with exponential backoff, up to
    ``max_attempts`` total attempts. A semaphore caps in-flight requests.
    The bearer token is read from ``api_key_env`` when that variable is set.
    """

    def __init__(
        self,
        endpoint: str,
        api_key_env: str = "OPENAI_API_KEY",
        *,
        timeout: float = DEFAULT_TIMEOUT,
        max_attempts: int = DEFAULT_MAX_ATTEMPTS,
        backoff_start: float = DEFAULT_BACKOFF_START,
        max_in_flight: int = DEFAULT_MAX_IN_FLIGHT,
        session: requests.Session | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        if max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        self.endpoint = endpoint
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.max_attempts = max_attempts
        self.backoff_start = backoff_start
        self._session = session or requests.Session()
        self._sleep = sleep
        self._semaphore = threading.Semaphore(max_in_flight)

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.api_key_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        return headers

    def complete(self, request: ChatRequest) -> ChatResponse:
        key = request.cache_key()
        payload = request.to_dict()
        del payload["vote_index"]  # local sampling discriminator, not an API field
        last_error = ""
        start = time.monotonic()
        with self._semaphore:
            for attempt in range(self.max_attempts):
                if attempt:
                    self._sleep(self.backoff_start * (2 ** (attempt - 1)))
                try:
                    resp = self._session.post(
                        self.endpoint,
                        json=payload,
                        headers=self._headers(),
                        timeout=self.timeout,
                    )
                except requests.RequestException as exc:
                    last_error = f"request failed: {exc}"
                    continue
                if resp.status_code == 429 or resp.status_code >= 500:
                    last_error = f"HTTP {resp.status_code}"
                    continue
                if resp.status_code != 200:
                    raise BackendError(f"HTTP {resp.status_code}: {resp.text[:200]}", key)
                return self._parse_body(resp, key, time.monotonic() - start)
        raise BackendError(
            f"gave up after {self.max_attempts} attempt(s): {last_error}", key
        )

    def _parse_body(self, resp: requests.Response, key: str, latency: float) -> ChatResponse:
        try:
            body = resp.json()
            choice = body["choices"][0]
            text = choice["message"]["content"]
            if not isinstance(text, str):
                raise TypeError("content is not a string")
            truncated = choice.get("finish_reason") == "length"
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"malformed response body: {exc}", key) from exc
        return ChatResponse(text=text, truncated=truncated, latency=latency, source="live")


@dataclass(frozen=True)
class ScriptRule:
    """Respond with ``text`` when the rendered prompt matches.

    ``contains`` is a literal substring test, ``regex`` a search pattern;
    either may be given. ``by_vote`` optionally cycles texts by vote_index to
    simulate sampling diversity while staying deterministic.
    """

    text: str = ""
    contains: str | None = None
    regex: str | None = None
    by_vote: tuple[str, ...] = field(default=())

    def matches(self, prompt: str) -> bool:
        if self.contains is not None and self.contains not in prompt:
            return False
        if self.regex is not None and re.search(self.regex, prompt) is None:
            return False
        return True

    def response_text(self, vote_index: int) -> str:
        if self.by_vote:
            return self.by_vote[vote_index % len(self.by_vote)]
        return self.text


class ScriptedBackend(Backend):
    """A pure function of the request: first matching rule wins."""

    def __init__(self, rules: list[ScriptRule], default: str | None = None) -> None:
        self.rules = list(rules)
        self.default = default

    @classmethod
    def from_json(cls, path: str | Path) -> "ScriptedBackend":
        with Path(path).open("r", encoding="utf-8") as fh:
            spec = json.load(fh)
        rules = [
            ScriptRule(
                text=r.get("text", ""),
                contains=r.get("contains"),
                regex=r.get("regex"),
                by_vote=tuple(r.get("by_vote", ())),
            )
            for r in spec.get("rules", [])
        ]
        return cls(rules, default=spec.get("default"))

    def complete(self, request: ChatRequest) -> ChatResponse:
        prompt = "\n\n".join(content for _, content in request.messages)
        for rule in self.rules:
            if rule.matches(prompt):
                return ChatResponse(
                    text=rule.response_text(request.vote_index), source="scripted"
                )
        if self.default is not None:
            return ChatResponse(text=self.default, source="scripted")
        raise BackendError("no scripted rule matches the request", request.cache_key())


class CachingBackend(Backend):
    """Record/replay cache keyed by ChatRequest.cache_key(), one JSON file each.

    With an inner backend, misses are forwarded and recorded (writes are
    serialized and atomic). Without one, a miss is an error, which makes the
    instance a strict replayer.
    """

    def __init__(self, cache_dir: str | Path, inner: Backend | None = None) -> None:
        self.cache_dir = Path(cache_dir)
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        self.inner = inner
        self._write_lock = threading.Lock()

    def _path(self, key: str) -> Path:
        return self.cache_dir / f"{key}.json"

    def complete(self, request: ChatRequest) -> ChatResponse:
        key = request.cache_key()
        path = self._path(key)
        if path.exists():
            with path.open("r", encoding="utf-8") as fh:
                entry = json.load(fh)
            return ChatResponse(
                text=entry["response"]["text"],
                truncated=entry["response"]["truncated"],
                latency=0.0,
                source="replay",
            )
        if self.inner is None:
            raise BackendError("replay miss and no live backend configured", key)
        response = self.inner.complete(request)
        entry = {
            "request": request.to_dict(),
            "response": {"text": response.text, "truncated": response.truncated},
        }
        blob = json.dumps(entry, ensure_ascii=False, indent=2)
        with self._write_lock:
            tmp = path.with_suffix(".tmp")
            tmp.write_text(blob, encoding="utf-8")
            os.replace(tmp, path)
        return response
