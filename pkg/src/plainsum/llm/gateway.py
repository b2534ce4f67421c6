"""Chat request/response types, the call ledger and the gateway front door."""

from __future__ import annotations

import hashlib
import json
import logging
import threading
from dataclasses import dataclass, field
from typing import Any, Protocol

logger = logging.getLogger(__name__)

ROLES = ("system", "user", "assistant")


class GatewayError(RuntimeError):
    """Base class for backend failures."""


class CredentialMissingError(GatewayError):
    pass


class MalformedResponseError(GatewayError):
    pass


class ExhaustedRetriesError(GatewayError):
    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


class BackendHTTPError(GatewayError):
    """Non-retryable HTTP status (4xx other than 429)."""

    def __init__(self, message: str, status: int):
        super().__init__(message)
        self.status = status


class CassetteMissError(GatewayError):
    """Replay backend has no recorded response for a request."""


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def sha256_hex(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class Message:
    role: str
    content: str


@dataclass(frozen=True)
class ChatRequest:
    model_id: str
    messages: tuple[Message, ...]
    temperature: float = 0.0
    top_p: float = 0.95
    top_k: int = 20
    max_tokens: int = 4096

    def __post_init__(self):
        if not self.messages:
            raise ValueError("a chat request needs at least one message")
        if self.messages[0].role not in ("system", "user"):
            raise ValueError("first message must be a system or user message")
        for m in self.messages:
            if m.role not in ROLES:
                raise ValueError(f"unknown message role {m.role!r}")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must lie in (0, 1]")
        if self.top_k < 0:
            raise ValueError("top_k must be >= 0")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "messages": [{"role": m.role, "content": m.content} for m in self.messages],
            "temperature": self.temperature,
            "top_p": self.top_p,
            "top_k": self.top_k,
            "max_tokens": self.max_tokens,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ChatRequest":
        return cls(
            model_id=data["model_id"],
            messages=tuple(Message(m["role"], m["content"]) for m in data["messages"]),
            temperature=float(data["temperature"]),
            top_p=float(data["top_p"]),
            top_k=int(data["top_k"]),
            max_tokens=int(data["max_tokens"]),
        )

    def digest(self) -> str:
        return sha256_hex(canonical_json(self.to_dict()))

    def with_messages(self, *extra: Message) -> "ChatRequest":
        return ChatRequest(
            model_id=self.model_id,
            messages=self.messages + tuple(extra),
            temperature=self.temperature,
            top_p=self.top_p,
            top_k=self.top_k,
            max_tokens=self.max_tokens,
        )


@dataclass(frozen=True)
class ChatResponse:
    content: str
    prompt_tokens: int = 0
    completion_tokens: int = 0
    latency_ms: int = 0
    backend: str = "scripted"
    truncated: bool = False

    def to_dict(self) -> dict:
        return {
            "content": self.content,
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens,
            "latency_ms": self.latency_ms,
            "backend": self.backend,
            "truncated": self.truncated,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ChatResponse":
        return cls(
            content=data["content"],
            prompt_tokens=int(data.get("prompt_tokens", 0)),
            completion_tokens=int(data.get("completion_tokens", 0)),
            latency_ms=int(data.get("latency_ms", 0)),
            backend=data.get("backend", "replay"),
            truncated=bool(data.get("truncated", False)),
        )


@dataclass(frozen=True)
class CallContext:
    """Who is calling and with what structured inputs.

    ``payload`` carries the agent's structured inputs (summary text,
    checklist, ...).  Only the scripted backend looks at it; it is not
    part of the request hash.
    """

    role: str
    round_index: int = 0
    doc_id: str = ""
    payload: dict | None = None


@dataclass(frozen=True)
class CallRecord:
    agent_role: str
    round_index: int
    request_hash: str
    response_hash: str
    doc_id: str = ""

    def to_dict(self) -> dict:
        return {
            "agent_role": self.agent_role,
            "round_index": self.round_index,
            "request_hash": self.request_hash,
            "response_hash": self.response_hash,
            "doc_id": self.doc_id,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CallRecord":
        return cls(
            agent_role=data["agent_role"],
            round_index=int(data["round_index"]),
            request_hash=data["request_hash"],
            response_hash=data["response_hash"],
            doc_id=data.get("doc_id", ""),
        )


@dataclass
class CallLedger:
    """Append-only log of logical model calls (retries count once)."""

    records: list[CallRecord] = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def append(self, record: CallRecord) -> None:
        with self._lock:
            self.records.append(record)

    @property
    def total_calls(self) -> int:
        return len(self.records)

    def calls_per_round(self, doc_id: str | None = None) -> dict[int, int]:
        out: dict[int, int] = {}
        for r in self.select(doc_id=doc_id):
            out[r.round_index] = out.get(r.round_index, 0) + 1
        return dict(sorted(out.items()))

    def select(self, doc_id: str | None = None, round_index: int | None = None) -> list[CallRecord]:
        with self._lock:
            snapshot = list(self.records)
        return [
            r
            for r in snapshot
            if (doc_id is None or r.doc_id == doc_id)
            and (round_index is None or r.round_index == round_index)
        ]


class Backend(Protocol):
    name: str

    def send(self, request: ChatRequest, ctx: CallContext) -> ChatResponse: ...


class Gateway:
    """Uniform entry point: send a request through a backend and log it."""

    def __init__(self, backend: Backend, ledger: CallLedger | None = None):
        self.backend = backend
        self.ledger = ledger if ledger is not None else CallLedger()

    def complete(
        self,
        request: ChatRequest,
        *,
        role: str,
        round_index: int = 0,
        doc_id: str = "",
        payload: dict | None = None,
    ) -> ChatResponse:
        ctx = CallContext(role=role, round_index=round_index, doc_id=doc_id, payload=payload)
        response = self.backend.send(request, ctx)
        if response.truncated:
            logger.warning("%s response for %s hit the length limit", role, doc_id or "<doc>")
        self.ledger.append(
            CallRecord(
                agent_role=role,
                round_index=round_index,
                request_hash=request.digest(),
                response_hash=sha256_hex(response.content),
                doc_id=doc_id,
            )
        )
        return response
