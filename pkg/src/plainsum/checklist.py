"""Merge reader feedback into a priority-ordered, top-K-per-category checklist.

Issues are keyed by (category, case-folded whitespace-collapsed excerpt).
Rank order is: more flagging personas first, then higher ARI of the
enclosing summary sentence, then earlier position in the summary.  The
normalized key is a final tie-break so the order is total.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

from .agents.types import CATEGORIES, ReaderFeedback
from .spans import locate, normalize_key
from .textmetrics import Sentence, TokenizedText, ari, tokenize

logger = logging.getLogger(__name__)

DEFAULT_K = 3
CATEGORY_PREFIX = {"unknown_terms": "U", "missing_contexts": "M", "confusing_sentences": "C"}


def issue_identity(category: str, excerpt: str) -> str:
    return f"{category}:{normalize_key(excerpt)}"


@dataclass(frozen=True)
class Issue:
    category: str
    excerpt: str
    normalized_key: str
    flaggers: tuple[str, ...]
    ari_difficulty: float
    first_seen: int
    comments: tuple[tuple[str, str], ...] = ()

    @property
    def flag_count(self) -> int:
        return len(self.flaggers)

    @property
    def identity(self) -> str:
        return f"{self.category}:{self.normalized_key}"

    def sort_key(self) -> tuple:
        return (-self.flag_count, -self.ari_difficulty, self.first_seen, self.normalized_key)

    def to_dict(self) -> dict:
        return {
            "excerpt": self.excerpt,
            "flag_count": self.flag_count,
            "flaggers": list(self.flaggers),
            "ari": self.ari_difficulty,
            "position": self.first_seen,
            "comments": [{"persona": p, "comment": c} for p, c in self.comments],
        }

    @classmethod
    def from_dict(cls, category: str, data: dict) -> "Issue":
        return cls(
            category=category,
            excerpt=data["excerpt"],
            normalized_key=normalize_key(data["excerpt"]),
            flaggers=tuple(data["flaggers"]),
            ari_difficulty=float(data["ari"]),
            first_seen=int(data["position"]),
            comments=tuple((c["persona"], c["comment"]) for c in data.get("comments", [])),
        )


@dataclass(frozen=True)
class Checklist:
    k: int = DEFAULT_K
    unknown_terms: tuple[Issue, ...] = ()
    missing_contexts: tuple[Issue, ...] = ()
    confusing_sentences: tuple[Issue, ...] = ()

    def items(self, category: str) -> tuple[Issue, ...]:
        if category not in CATEGORIES:
            raise KeyError(category)
        return getattr(self, category)

    def issues(self) -> list[Issue]:
        return [i for c in CATEGORIES for i in self.items(c)]

    def labeled_issues(self) -> list[tuple[str, Issue]]:
        """Short ids (U1, M1, C1, ...) used in the expert prompt."""
        return [
            (f"{CATEGORY_PREFIX[c]}{n}", issue)
            for c in CATEGORIES
            for n, issue in enumerate(self.items(c), 1)
        ]

    def __len__(self) -> int:
        return sum(len(self.items(c)) for c in CATEGORIES)

    def to_dict(self) -> dict:
        out: dict = {c: [i.to_dict() for i in self.items(c)] for c in CATEGORIES}
        out["k"] = self.k
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "Checklist":
        return cls(
            k=int(data.get("k", DEFAULT_K)),
            **{c: tuple(Issue.from_dict(c, i) for i in data.get(c, [])) for c in CATEGORIES},
        )


def _enclosing(tokens: TokenizedText, span: tuple[int, int] | None) -> Sentence | None:
    if span is None:
        return None
    for sentence in tokens.sentences:
        if sentence.start <= span[0] and span[1] <= sentence.start + len(sentence.text):
            return sentence
    return None


def enclosing_sentence(summary: str, excerpt: str) -> str | None:
    """The single summary sentence holding the excerpt's first occurrence."""
    found = _enclosing(tokenize(summary), locate(summary, excerpt))
    return found.text if found is not None else None


def _difficulty(tokens: TokenizedText, span: tuple[int, int], excerpt: str) -> float:
    sentence = _enclosing(tokens, span)
    scope = TokenizedText((sentence,)) if sentence is not None else tokenize(excerpt)
    if scope.word_count == 0:
        return 0.0
    return ari(scope)


def aggregate(feedbacks: Sequence[ReaderFeedback], summary: str, k: int = DEFAULT_K) -> Checklist:
    if k < 1:
        raise ValueError("k must be >= 1")
    personas = [fb.persona for fb in feedbacks]
    if len(set(personas)) != len(personas):
        raise ValueError(f"feedback must come from distinct personas, got {personas}")

    groups: dict[tuple[str, str], dict] = {}
    for fb in feedbacks:
        for category in CATEGORIES:
            for item in fb.items(category):
                span = locate(summary, item.excerpt)
                if span is None:
                    logger.warning("dropping unanchored %s item from %s: %r", category, fb.persona, item.excerpt)
                    continue
                key = normalize_key(item.excerpt)
                g = groups.setdefault((category, key), {"variants": set(), "flaggers": set(), "comments": set()})
                g["variants"].add((span, item.excerpt))
                g["flaggers"].add(fb.persona)
                if item.comment:
                    g["comments"].add((fb.persona, item.comment))

    tokens = tokenize(summary)
    by_category: dict[str, list[Issue]] = {c: [] for c in CATEGORIES}
    for (category, key), g in groups.items():
        span, excerpt = min(g["variants"])
        by_category[category].append(
            Issue(
                category=category,
                excerpt=excerpt,
                normalized_key=key,
                flaggers=tuple(sorted(g["flaggers"])),
                ari_difficulty=_difficulty(tokens, span, excerpt),
                first_seen=span[0],
                comments=tuple(sorted(g["comments"])),
            )
        )
    ranked = {c: tuple(sorted(issues, key=Issue.sort_key)[:k]) for c, issues in by_category.items()}
    return Checklist(k=k, **ranked)


def unanchored_items(feedbacks: Iterable[ReaderFeedback]) -> list[dict]:
    """Audit view of items whose excerpt was not found in the summary."""
    out = []
    for fb in feedbacks:
        for category in CATEGORIES:
            for item in fb.items(category):
                if not item.anchored:
                    out.append({"persona": fb.persona, "category": category, "excerpt": item.excerpt})
    return out
