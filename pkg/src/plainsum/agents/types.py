"""Domain types shared by the agent roles, checklist and editor."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum


class AgentError(RuntimeError):
    """Base class for agent-level failures."""


class UnknownLabelError(AgentError):
    """The model answered with a label outside the closed set."""


class SchemaViolationError(AgentError):
    """Structured output still unusable after the single reprompt."""


class UnparseableClassificationError(SchemaViolationError):
    pass


class EmptyDraftError(AgentError):
    pass


class TruncatedOutputWarning(UserWarning):
    pass


def _label_key(text: str) -> str:
    return re.sub(r"[^a-z]", "", text.casefold())


class Genre(str, Enum):
    ACADEMIC_PAPER = "Academic Paper"
    POLICY_REPORT = "Policy Report"
    LEGISLATIVE_BILL = "Legislative Bill"
    PATENT_DOCUMENT = "Patent Document"

    @classmethod
    def parse(cls, label: str) -> "Genre":
        if isinstance(label, cls):
            return label
        key = _label_key(str(label))
        for g in cls:
            if key in (_label_key(g.value), _label_key(g.name)):
                return g
        raise UnknownLabelError(f"unknown document type {label!r}")

    @property
    def default_expert(self) -> "ExpertRole":
        return _DEFAULT_EXPERT[self]


class ExpertRole(str, Enum):
    BIOMEDICAL = "Biomedical"
    POLICY = "Policy"
    LEGAL = "Legal"
    PATENT = "Patent"

    @classmethod
    def parse(cls, label: str) -> "ExpertRole":
        if isinstance(label, cls):
            return label
        key = _label_key(str(label))
        if key.endswith("expert"):
            key = key[: -len("expert")]
        key = _EXPERT_SYNONYMS.get(key, key)
        for e in cls:
            if key == _label_key(e.value):
                return e
        raise UnknownLabelError(f"unknown expert {label!r}")


_DEFAULT_EXPERT = {
    Genre.ACADEMIC_PAPER: ExpertRole.BIOMEDICAL,
    Genre.POLICY_REPORT: ExpertRole.POLICY,
    Genre.LEGISLATIVE_BILL: ExpertRole.LEGAL,
    Genre.PATENT_DOCUMENT: ExpertRole.PATENT,
}
_EXPERT_SYNONYMS = {"legislative": "legal", "medical": "biomedical"}


@dataclass(frozen=True)
class TemplateSlot:
    label: str
    guidance: str
    sentences: tuple[int, int]


@dataclass(frozen=True)
class SummaryTemplate:
    genre: Genre
    slots: tuple[TemplateSlot, ...]

    def __post_init__(self):
        if len(self.slots) < 3:
            raise ValueError(f"template for {self.genre.value} needs at least 3 slots")
        labels = [s.label for s in self.slots]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate slot labels in template for {self.genre.value}")
        for s in self.slots:
            lo, hi = s.sentences
            if not 1 <= lo <= hi:
                raise ValueError(f"bad sentence range for slot {s.label!r}")


CATEGORIES = ("unknown_terms", "missing_contexts", "confusing_sentences")


@dataclass(frozen=True)
class FeedbackItem:
    excerpt: str
    comment: str = ""
    anchored: bool = False

    def to_dict(self) -> dict:
        return {"excerpt": self.excerpt, "comment": self.comment, "anchored": self.anchored}

    @classmethod
    def from_dict(cls, data: dict) -> "FeedbackItem":
        return cls(data["excerpt"], data.get("comment", ""), bool(data.get("anchored", False)))


@dataclass(frozen=True)
class ReaderFeedback:
    persona: str
    unknown_terms: tuple[FeedbackItem, ...] = ()
    missing_contexts: tuple[FeedbackItem, ...] = ()
    confusing_sentences: tuple[FeedbackItem, ...] = ()

    def items(self, category: str) -> tuple[FeedbackItem, ...]:
        if category not in CATEGORIES:
            raise KeyError(category)
        return getattr(self, category)

    def to_dict(self) -> dict:
        out: dict = {"persona": self.persona}
        for c in CATEGORIES:
            out[c] = [i.to_dict() for i in self.items(c)]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ReaderFeedback":
        return cls(
            persona=data["persona"],
            **{c: tuple(FeedbackItem.from_dict(i) for i in data.get(c, [])) for c in CATEGORIES},
        )


class RevisionKind(str, Enum):
    REPLACE_TERM = "ReplaceTerm"
    ADD_CONTEXT = "AddContext"
    REWRITE_SENTENCE = "RewriteSentence"
    INSUFFICIENT_INFORMATION = "InsufficientInformation"

    @classmethod
    def parse(cls, label: str) -> "RevisionKind":
        key = _label_key(str(label))
        for k in cls:
            if key in (_label_key(k.value), _label_key(k.name)):
                return k
        if key in ("insufficientinfo", "insufficient"):
            return cls.INSUFFICIENT_INFORMATION
        raise UnknownLabelError(f"unknown revision kind {label!r}")


REPLACE_TERM_MAX_WORDS = 5
ADD_CONTEXT_MAX_WORDS = 15


@dataclass(frozen=True)
class RevisionProposal:
    kind: RevisionKind
    original: str
    replacement: str = ""
    rationale: str = ""
    source_issue: str = ""
    flags: tuple[str, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "original": self.original,
            "replacement": self.replacement,
            "rationale": self.rationale,
            "source_issue": self.source_issue,
            "flags": list(self.flags),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RevisionProposal":
        return cls(
            kind=RevisionKind(data["kind"]),
            original=data["original"],
            replacement=data.get("replacement", ""),
            rationale=data.get("rationale", ""),
            source_issue=data.get("source_issue", ""),
            flags=tuple(data.get("flags", ())),
        )
