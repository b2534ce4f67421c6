from .backends import (
    DEFAULT_API_KEY_ENV,
    HttpBackend,
    RecordingBackend,
    ReplayBackend,
    ScriptedBackend,
)
from .gateway import (
    BackendHTTPError,
    CallContext,
    CallLedger,
    CallRecord,
    CassetteMissError,
    ChatRequest,
    ChatResponse,
    CredentialMissingError,
    ExhaustedRetriesError,
    Gateway,
    GatewayError,
    MalformedResponseError,
    Message,
)
from .jsonout import JsonExtractionError, JsonParseError, NoJsonFoundError, extract_json

__all__ = [
    "DEFAULT_API_KEY_ENV",
    "BackendHTTPError",
    "CallContext",
    "CallLedger",
    "CallRecord",
    "CassetteMissError",
    "ChatRequest",
    "ChatResponse",
    "CredentialMissingError",
    "ExhaustedRetriesError",
    "Gateway",
    "GatewayError",
    "HttpBackend",
    "JsonExtractionError",
    "JsonParseError",
    "MalformedResponseError",
    "Message",
    "NoJsonFoundError",
    "RecordingBackend",
    "ReplayBackend",
    "ScriptedBackend",
    "extract_json",
]
