"""Concrete gateway backends: live HTTP, cassette replay/record, scripted."""

from __future__ import annotations

import json
import logging
import os
import random
import threading
import time
from collections import defaultdict, deque
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Union

import httpx

from .gateway import (
    BackendHTTPError,
    CallContext,
    CassetteMissError,
    ChatRequest,
    ChatResponse,
    CredentialMissingError,
    ExhaustedRetriesError,
    MalformedResponseError,
)

logger = logging.getLogger(__name__)

DEFAULT_API_KEY_ENV = "OPENAI_API_KEY"
RETRYABLE_STATUS = frozenset({429, 500, 502, 503, 504})


class HttpBackend:
    """OpenAI-compatible ``/chat/completions`` client with retry and backoff."""

    name = "http"

    def __init__(
        self,
        endpoint: str,
        *,
        api_key_env: str = DEFAULT_API_KEY_ENV,
        timeout: float = 120.0,
        max_attempts: int = 3,
        base_delay: float = 1.0,
        backoff_factor: float = 2.0,
        jitter: float = 0.2,
        send_top_k: bool = False,
        sleep: Callable[[float], None] = time.sleep,
        rng: random.Random | None = None,
        client: httpx.Client | None = None,
    ):
        if max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        self.endpoint = endpoint.rstrip("/")
        self.api_key_env = api_key_env
        self.max_attempts = max_attempts
        self.base_delay = base_delay
        self.backoff_factor = backoff_factor
        self.jitter = jitter
        self.send_top_k = send_top_k
        self._sleep = sleep
        self._rng = rng or random.Random()
        self._client = client or httpx.Client(timeout=timeout)

    def body(self, request: ChatRequest) -> dict:
        body = {
            "model": request.model_id,
            "messages": [{"role": m.role, "content": m.content} for m in request.messages],
            "temperature": request.temperature,
            "top_p": request.top_p,
            "max_tokens": request.max_tokens,
        }
        if self.send_top_k and request.top_k > 0:
            body["top_k"] = request.top_k
        return body

    def delay(self, retry_index: int) -> float:
        spread = self._rng.uniform(-self.jitter, self.jitter)
        return self.base_delay * self.backoff_factor**retry_index * (1 + spread)

    def send(self, request: ChatRequest, ctx: CallContext) -> ChatResponse:
        api_key = os.environ.get(self.api_key_env, "").strip()
        if not api_key:
            raise CredentialMissingError(f"environment variable {self.api_key_env} is not set")
        url = f"{self.endpoint}/chat/completions"
        headers = {"Authorization": f"Bearer {api_key}"}
        body = self.body(request)
        last_status: int | None = None
        last_error = ""
        for attempt in range(self.max_attempts):
            if attempt:
                self._sleep(self.delay(attempt - 1))
            started = time.monotonic()
            try:
                resp = self._client.post(url, json=body, headers=headers)
            except httpx.TimeoutException as exc:
                last_status, last_error = None, f"timeout: {exc}"
                logger.info("attempt %d for %s timed out", attempt + 1, ctx.role)
                continue
            except httpx.TransportError as exc:
                last_status, last_error = None, f"transport error: {exc}"
                logger.info("attempt %d for %s failed: %s", attempt + 1, ctx.role, exc)
                continue
            latency_ms = int((time.monotonic() - started) * 1000)
            if resp.status_code in RETRYABLE_STATUS:
                last_status, last_error = resp.status_code, resp.text[:200]
                logger.info("attempt %d for %s got HTTP %d", attempt + 1, ctx.role, resp.status_code)
                continue
            if resp.status_code >= 400:
                raise BackendHTTPError(f"HTTP {resp.status_code}: {resp.text[:200]}", resp.status_code)
            return self._parse(resp, latency_ms)
        raise ExhaustedRetriesError(
            f"gave up after {self.max_attempts} attempts ({last_error})", status=last_status
        )

    @staticmethod
    def _parse(resp: httpx.Response, latency_ms: int) -> ChatResponse:
        try:
            data = resp.json()
        except ValueError as exc:
            raise MalformedResponseError(f"response is not JSON: {resp.text[:200]!r}") from exc
        try:
            choice = data["choices"][0]
            content = choice["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise MalformedResponseError(f"unexpected response shape: {str(data)[:200]}") from exc
        if content is None:
            content = ""
        if not isinstance(content, str):
            raise MalformedResponseError("message content is not a string")
        usage = data.get("usage") or {}
        return ChatResponse(
            content=content,
            prompt_tokens=int(usage.get("prompt_tokens") or 0),
            completion_tokens=int(usage.get("completion_tokens") or 0),
            latency_ms=max(0, latency_ms),
            backend="http",
            truncated=choice.get("finish_reason") == "length",
        )


Reply = Union[str, ChatResponse]
Responder = Callable[[ChatRequest, CallContext], Reply]


class ScriptedBackend:
    """Offline backend driven by canned replies or a rule function.

    ``script`` may be a single string (always returned), a sequence of
    strings (returned in order, then exhausted), or a callable receiving
    ``(request, ctx)``.
    """

    name = "scripted"

    def __init__(self, script: str | Iterable[Reply] | Responder):
        self._lock = threading.Lock()
        if isinstance(script, str) or callable(script):
            self._script = script
            self._queue = None
        else:
            self._script = None
            self._queue = deque(script)

    def send(self, request: ChatRequest, ctx: CallContext) -> ChatResponse:
        if self._queue is not None:
            with self._lock:
                if not self._queue:
                    raise MalformedResponseError("scripted backend ran out of replies")
                reply = self._queue.popleft()
        elif isinstance(self._script, str):
            reply = self._script
        else:
            reply = self._script(request, ctx)
        if isinstance(reply, ChatResponse):
            return reply
        prompt_words = sum(len(m.content.split()) for m in request.messages)
        return ChatResponse(
            content=reply,
            prompt_tokens=prompt_words,
            completion_tokens=len(reply.split()),
            latency_ms=0,
            backend="scripted",
        )


class ReplayBackend:
    """Serve responses from a JSON-lines cassette keyed by request hash.

    Identical requests recorded several times are served in file order.
    """

    name = "replay"

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._responses: dict[str, deque[ChatResponse]] = defaultdict(deque)
        with self.path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    resp = ChatResponse.from_dict(rec["response"])
                    self._responses[rec["request_hash"]].append(resp)
                except (ValueError, KeyError) as exc:
                    raise MalformedResponseError(f"{self.path}:{lineno}: bad cassette record") from exc

    def send(self, request: ChatRequest, ctx: CallContext) -> ChatResponse:
        key = request.digest()
        with self._lock:
            queue = self._responses.get(key)
            if not queue:
                raise CassetteMissError(f"no recorded response for {ctx.role} request {key[:12]}")
            recorded = queue.popleft()
        return ChatResponse(
            content=recorded.content,
            prompt_tokens=recorded.prompt_tokens,
            completion_tokens=recorded.completion_tokens,
            latency_ms=recorded.latency_ms,
            backend="replay",
            truncated=recorded.truncated,
        )


class RecordingBackend:
    """Wrap another backend and append every exchange to a cassette file."""

    def __init__(self, inner, path: str | Path, clock: Callable[[], datetime] | None = None):
        self.inner = inner
        self.name = inner.name
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._clock = clock or (lambda: datetime.now(timezone.utc))
        self._lock = threading.Lock()

    def send(self, request: ChatRequest, ctx: CallContext) -> ChatResponse:
        response = self.inner.send(request, ctx)
        record = {
            "request_hash": request.digest(),
            "agent_role": ctx.role,
            "request": request.to_dict(),
            "response": response.to_dict(),
            "timestamp": self._clock().isoformat(),
        }
        line = json.dumps(record, ensure_ascii=False, sort_keys=True)
        with self._lock, self.path.open("a", encoding="utf-8") as fh:
            fh.write(line + "\n")
        return response
