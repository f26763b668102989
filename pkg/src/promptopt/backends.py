"""LLM completion backends: a deterministic scripted backend and an HTTP client.

The scripted backend is the test oracle for everything above it: rules map
request features to canned responses, and every request is recorded so tests
can assert on call counts and decoding parameters.  The HTTP client speaks
the common chat-completions JSON wire format so any compatible server works
without code changes.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass
from typing import Callable, Protocol, Sequence

import requests

logger = logging.getLogger(__name__)

from .dsl import Role
from .errors import (
    AuthenticationError,
    BackendUnavailableError,
    ContextOverflowError,
    NoRuleMatchedError,
)

DEFAULT_MAX_TOKENS = 1024

BASE_URL_ENV = "PROMPTOPT_BASE_URL"
API_KEY_ENV = "PROMPTOPT_API_KEY"


@dataclass(frozen=True)
class Message:
    role: Role
    content: str


@dataclass(frozen=True)
class ChatRequest:
    model_id: str
    messages: tuple[Message, ...]
    temperature: float = 0.0
    max_tokens: int = DEFAULT_MAX_TOKENS


@dataclass(frozen=True)
class ChatResponse:
    text: str
    finish_reason: str = "stop"  # stop | length | error


class Backend(Protocol):
    def complete(self, request: ChatRequest) -> ChatResponse: ...


def request_fingerprint(model_id: str, messages: Sequence[Message]) -> str:
    """Stable hash of a model id and all message contents, for exact-match rules."""
    hasher = hashlib.sha256()
    hasher.update(model_id.encode("utf-8"))
    for message in messages:
        hasher.update(b"\x1f")
        hasher.update(message.content.encode("utf-8"))
    return hasher.hexdigest()


def _check_request(request: ChatRequest) -> None:
    if not request.messages:
        raise ValueError("request must carry at least one message")


@dataclass(frozen=True)
class ScriptRule:
    """First matching rule wins; exactly one matcher kind must be set."""

    response: str
    substring: str | None = None
    fingerprint: str | None = None

    def __post_init__(self) -> None:
        if (self.substring is None) == (self.fingerprint is None):
            raise ValueError("rule needs exactly one of substring or fingerprint")


class ScriptedBackend:
    """Deterministic backend driven by an ordered rule list.

    Substring rules match against the last user-role message; fingerprint
    rules match the exact conversation hash.  Requests are recorded for
    instrumentation (call counts, greedy-decoding assertions).
    """

    def __init__(self, rules: Sequence[ScriptRule] = (), default: str | None = None) -> None:
        self.rules = list(rules)
        self.default = default
        self.requests: list[ChatRequest] = []
        self._lock = threading.Lock()

    def complete(self, request: ChatRequest) -> ChatResponse:
        _check_request(request)
        with self._lock:
            self.requests.append(request)
        last_user = next(
            (m.content for m in reversed(request.messages) if m.role == Role.USER), ""
        )
        print_hash = None
        for rule in self.rules:
            if rule.substring is not None:
                if rule.substring in last_user:
                    return ChatResponse(rule.response)
            else:
                if print_hash is None:
                    print_hash = request_fingerprint(request.model_id, request.messages)
                if rule.fingerprint == print_hash:
                    return ChatResponse(rule.response)
        if self.default is not None:
            return ChatResponse(self.default)
        raise NoRuleMatchedError(
            f"no scripted rule matched; last user message was {last_user[:200]!r}"
        )


class QueueBackend:
    """Test helper that replays responses in FIFO order regardless of content."""

    def __init__(self, responses: Sequence[str]) -> None:
        self._responses = list(responses)
        self.requests: list[ChatRequest] = []
        self._lock = threading.Lock()

    def complete(self, request: ChatRequest) -> ChatResponse:
        _check_request(request)
        with self._lock:
            self.requests.append(request)
            if not self._responses:
                raise NoRuleMatchedError("queue backend exhausted")
            return ChatResponse(self._responses.pop(0))


_OVERFLOW_MARKERS = ("context length", "context window", "maximum context", "too many tokens")


class HttpBackend:
    """Chat-completions HTTP client with bounded retries and concurrency.

    Configuration falls back to the PROMPTOPT_BASE_URL / PROMPTOPT_API_KEY
    environment variables.  Transient failures (connection errors, 429, 5xx)
    are retried up to ``max_retries`` times with exponential backoff;
    authentication failures are never retried.
    """

    def __init__(
        self,
        base_url: str | None = None,
        api_key: str | None = None,
        timeout_s: float = 60.0,
        max_retries: int = 3,
        max_in_flight: int = 8,
        merge_consecutive_roles: bool = True,
        sleeper: Callable[[float], None] = time.sleep,
    ) -> None:
        base = base_url or os.environ.get(BASE_URL_ENV)
        if not base:
            raise BackendUnavailableError(
                f"no base URL configured (set {BASE_URL_ENV} or pass base_url)"
            )
        self.base_url = base.rstrip("/")
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        self.timeout_s = timeout_s
        self.max_retries = max_retries
        self.merge_consecutive_roles = merge_consecutive_roles
        self._sleeper = sleeper
        self._semaphore = threading.BoundedSemaphore(max_in_flight)
        self._session = requests.Session()

    def _payload(self, request: ChatRequest) -> dict:
        messages: list[dict] = []
        for message in request.messages:
            wire = {"role": message.role.value, "content": message.content}
            if (
                self.merge_consecutive_roles
                and messages
                and messages[-1]["role"] == wire["role"]
            ):
                messages[-1]["content"] += wire["content"]
            else:
                messages.append(wire)
        return {
            "model": request.model_id,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }

    def complete(self, request: ChatRequest) -> ChatResponse:
        _check_request(request)
        payload = self._payload(request)
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        url = f"{self.base_url}/chat/completions"
        if logger.isEnabledFor(logging.DEBUG):
            logger.debug(
                "POST %s (auth %s): %s",
                url,
                "redacted" if self.api_key else "none",
                json.dumps(payload)[:2000],
            )
        last_error: Exception | None = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                self._sleeper(0.5 * 2 ** (attempt - 1))
            try:
                with self._semaphore:
                    resp = self._session.post(
                        url, json=payload, headers=headers, timeout=self.timeout_s
                    )
            except requests.RequestException as exc:
                last_error = exc
                continue
            if resp.status_code in (401, 403):
                raise AuthenticationError(f"authentication rejected ({resp.status_code})")
            if resp.status_code == 400:
                body = resp.text.lower()
                if any(marker in body for marker in _OVERFLOW_MARKERS):
                    raise ContextOverflowError("request exceeds the model context window")
                raise BackendUnavailableError(f"bad request (400): {resp.text[:500]}")
            if resp.status_code == 429 or resp.status_code >= 500:
                last_error = BackendUnavailableError(f"server returned {resp.status_code}")
                continue
            logger.debug("response %s: %s", resp.status_code, resp.text[:2000])
            try:
                body_json = resp.json()
                choice = body_json["choices"][0]
                text = choice["message"]["content"]
                finish = choice.get("finish_reason", "stop")
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise BackendUnavailableError(
                    f"malformed completion response: {exc}: {resp.text[:500]}"
                ) from exc
            if finish not in ("stop", "length"):
                finish = "error"
            return ChatResponse(text=text if isinstance(text, str) else json.dumps(text), finish_reason=finish)
        raise BackendUnavailableError(f"request failed after {self.max_retries + 1} attempts: {last_error}")
