"""Whitespace-normalized substring search shared by anchoring code.

Reader excerpts and revision anchors are quoted back by a model, which
often changes spacing and line breaks.  Matching therefore collapses
every whitespace run to a single space on both sides, but stays
case-sensitive.
"""

from __future__ import annotations

import re

_WS_RE = re.compile(r"\s+")


def normalize_ws(text: str) -> str:
    """Collapse whitespace runs to one space and strip the ends."""
    return _WS_RE.sub(" ", text).strip()


def normalize_key(text: str) -> str:
    """Case-folded, whitespace-collapsed identity key."""
    return normalize_ws(text).casefold()


def _collapse_with_map(text: str) -> tuple[str, list[int]]:
    chars: list[str] = []
    positions: list[int] = []
    prev_space = False
    for i, ch in enumerate(text):
        if ch.isspace():
            if prev_space:
                continue
            chars.append(" ")
            positions.append(i)
            prev_space = True
        else:
            chars.append(ch)
            positions.append(i)
            prev_space = False
    return "".join(chars), positions


def find_span(haystack: str, needle: str, start: int = 0) -> tuple[int, int] | None:
    """Locate ``needle`` in ``haystack`` ignoring whitespace differences.

    Returns ``(begin, end)`` offsets into the *original* haystack for the
    first occurrence beginning at or after ``start``, or ``None``.  An
    empty needle (after normalization) never matches.
    """
    target = normalize_ws(needle)
    if not target:
        return None
    collapsed, positions = _collapse_with_map(haystack)
    # first collapsed index whose source position is >= start
    lo = 0
    while lo < len(positions) and positions[lo] < start:
        lo += 1
    idx = collapsed.find(target, lo)
    if idx < 0:
        return None
    begin = positions[idx]
    last = idx + len(target) - 1
    end = positions[last] + 1
    return begin, end


def _word_char(ch: str) -> bool:
    return ch.isalnum() or ch == "_"


def find_word_span(haystack: str, needle: str, start: int = 0) -> tuple[int, int] | None:
    """Like :func:`find_span` but skips matches that begin or end inside a word."""
    pos = start
    while True:
        span = find_span(haystack, needle, pos)
        if span is None:
            return None
        b, e = span
        starts_mid_word = b > 0 and _word_char(haystack[b]) and _word_char(haystack[b - 1])
        ends_mid_word = e < len(haystack) and _word_char(haystack[e - 1]) and _word_char(haystack[e])
        if not (starts_mid_word or ends_mid_word):
            return span
        pos = b + 1


def locate(haystack: str, needle: str) -> tuple[int, int] | None:
    """Whole-word occurrence if there is one, else any occurrence."""
    return find_word_span(haystack, needle) or find_span(haystack, needle)


def contains_normalized(haystack: str, needle: str) -> bool:
    return find_span(haystack, needle) is not None
