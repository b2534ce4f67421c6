"""Pull a JSON value out of free-form model output.

Models wrap structured answers in prose and code fences.  We scan for
each ``{`` / ``[`` in order, cut out the bracket-balanced span (string
aware), and try to parse it.  One repair pass removes trailing commas.
"""

from __future__ import annotations

import json
from typing import Any


class JsonExtractionError(ValueError):
    pass


class NoJsonFoundError(JsonExtractionError):
    pass


class JsonParseError(JsonExtractionError):
    pass


_CLOSERS = {"{": "}", "[": "]"}


def _balanced_end(text: str, start: int) -> int | None:
    stack = []
    in_string = False
    escaped = False
    for i in range(start, len(text)):
        ch = text[i]
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch in _CLOSERS:
            stack.append(_CLOSERS[ch])
        elif ch in "}]":
            if not stack or stack.pop() != ch:
                return None
            if not stack:
                return i + 1
    return None


def strip_trailing_commas(text: str) -> str:
    """Drop commas that directly precede ``}`` or ``]`` (outside strings)."""
    out = []
    in_string = False
    escaped = False
    i = 0
    while i < len(text):
        ch = text[i]
        if in_string:
            out.append(ch)
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
        elif ch == '"':
            in_string = True
            out.append(ch)
        elif ch == ",":
            j = i + 1
            while j < len(text) and text[j].isspace():
                j += 1
            if j < len(text) and text[j] in "}]":
                i += 1
                continue
            out.append(ch)
        else:
            out.append(ch)
        i += 1
    return "".join(out)


def _parse(span: str) -> Any:
    try:
        return json.loads(span)
    except json.JSONDecodeError:
        return json.loads(strip_trailing_commas(span))


def extract_json(content: str) -> Any:
    """Return the first parseable top-level JSON object or array in ``content``."""
    starts = [i for i, ch in enumerate(content) if ch in _CLOSERS]
    if not starts:
        raise NoJsonFoundError("no JSON object or array in model output")
    last_error: Exception | None = None
    for start in starts:
        end = _balanced_end(content, start)
        if end is None:
            continue
        try:
            return _parse(content[start:end])
        except json.JSONDecodeError as exc:
            last_error = exc
    raise JsonParseError(f"could not parse JSON from model output: {last_error or 'unbalanced brackets'}")
