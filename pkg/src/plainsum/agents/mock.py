"""Deterministic offline stand-ins for every agent role.

``MockResponder`` plugs into :class:`~plainsum.llm.ScriptedBackend` and
answers from the structured call payload, never from the prompt text:

* readers apply literal flagging rules per persona (vocabulary list,
  syllable and length bounds, sentence length over 15 words, clause and
  passive-voice counts);
* the expert splits confusing sentences near their midpoint, swaps
  glossary terms, and marks everything else as insufficient information;
* the planner uses keyword rules, the drafter echoes the source with
  whitespace collapsed, and the editor returns the deterministic result.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Callable

from ..llm.gateway import CallContext, ChatRequest
from ..spans import normalize_ws
from ..textmetrics import (
    count_syllables,
    default_abbreviations,
    default_familiar_words,
    strip_word,
    tokenize,
)
from .types import CATEGORIES, Genre

LONG_SENTENCE_WORDS = 15

SUBORDINATORS = frozenset(
    "after although because before if once since though unless until whereas whenever when where whether while "
    "which who whom whose that".split()
)
RELATIVE_PRONOUNS = frozenset("which who whom whose that".split())

_ACRONYM_RE = re.compile(r"^[A-Z][A-Z0-9&]*[A-Z](?:s)?$")
_PASSIVE_RE = re.compile(r"\b(?:am|is|are|was|were|be|been|being)\s+(?:\w+ly\s+)?\w+(?:ed|en)\b", re.IGNORECASE)
_REDUCED_RELATIVE_RE = re.compile(
    r"\b(?!(?:am|is|are|was|were|be|been|being|has|have|had|get|got)\b)[A-Za-z]+\s+[a-z]+ed\s+by\b"
)
_INSTITUTION_RE = re.compile(
    r"\b(?:[A-Z][a-z]+\s+)*(?:Act|Agency|Administration|Bureau|Commission|Congress|Department|Institute|Office|Service)\b"
)

GLOSSARY = {
    "additional": "more",
    "approximately": "about",
    "commence": "start",
    "demonstrate": "show",
    "demonstrated": "showed",
    "expenditures": "spending",
    "facilitate": "help",
    "hypertension": "high blood pressure",
    "implement": "carry out",
    "individuals": "people",
    "legislation": "law",
    "mitigate": "reduce",
    "numerous": "many",
    "objective": "goal",
    "participants": "people in the study",
    "subsequently": "later",
    "sufficient": "enough",
    "utilize": "use",
    "utilized": "used",
}

_PLANNER_RULES: tuple[tuple[Genre, tuple[str, ...]], ...] = (
    (Genre.POLICY_REPORT, ("gao", "government accountability", "agency", "agencies", "federal program", "audit")),
    (Genre.LEGISLATIVE_BILL, ("this act", "this bill", "amends", "section ", "congress", "be it enacted")),
    (Genre.PATENT_DOCUMENT, ("invention", "embodiment", "apparatus", "claims", "patent")),
)


def _is_acronym(word: str) -> bool:
    return bool(_ACRONYM_RE.match(word))


def _candidate_forms(word: str) -> list[str]:
    """The word plus a few de-inflected guesses."""
    w = word.casefold()
    forms = [w]
    for suffix, repl in (("ies", "y"), ("ied", "y"), ("es", ""), ("s", ""), ("ed", ""), ("ed", "e"), ("ing", ""),
                         ("ing", "e"), ("ly", ""), ("er", ""), ("est", ""), ("'s", "")):
        if w.endswith(suffix) and len(w) - len(suffix) >= 2:
            stem = w[: -len(suffix)] + repl
            forms.append(stem)
            if len(stem) >= 3 and stem[-1] == stem[-2]:
                forms.append(stem[:-1])
    return forms


def is_familiar(word: str, familiar: frozenset[str] | None = None) -> bool:
    vocab = default_familiar_words() if familiar is None else familiar
    return any(form in vocab for form in _candidate_forms(word))


def _content_words(summary: str) -> list[str]:
    """Distinct alphabetic word tokens (first spelling wins), acronyms excluded."""
    seen: dict[str, str] = {}
    for token in summary.split():
        word = strip_word(token)
        if not word or not re.fullmatch(r"[A-Za-z][A-Za-z'-]*", word) or _is_acronym(word):
            continue
        seen.setdefault(word.casefold(), word)
    return list(seen.values())


def _acronyms(summary: str) -> list[str]:
    out: dict[str, None] = {}
    for token in summary.split():
        word = strip_word(token)
        if word and _is_acronym(word):
            out.setdefault(word)
    return list(out)


def _words_in(sentence_text: str) -> list[str]:
    return [strip_word(t).casefold() for t in sentence_text.split()]


@dataclass(frozen=True)
class ReaderRules:
    """Flagging rules for one mock persona."""

    unknown: Callable[[str], bool]
    institutions: bool = False
    long_sentence_words: int | None = LONG_SENTENCE_WORDS
    subordinator_limit: int | None = None
    relative_limit: int | None = None
    passive_limit: int | None = None
    reduced_relatives: bool = False

    def confusing(self, text: str) -> str | None:
        words = _words_in(text)
        n = sum(1 for w in words if w)
        if self.long_sentence_words is not None and n > self.long_sentence_words:
            return f"This sentence has {n} words, too long for me to follow."
        if self.subordinator_limit is not None and sum(w in SUBORDINATORS for w in words) >= self.subordinator_limit:
            return "Too many clauses stacked in one sentence."
        if self.relative_limit is not None and sum(w in RELATIVE_PRONOUNS for w in words) >= self.relative_limit:
            return "I lose track of what 'which' or 'that' refers to."
        if self.passive_limit is not None and len(_PASSIVE_RE.findall(text)) >= self.passive_limit:
            return "Several passive phrases; I cannot tell who does what."
        if self.reduced_relatives and _REDUCED_RELATIVE_RE.search(text):
            return "I misread this sentence on the first try."
        return None

    def review(self, summary: str) -> dict:
        unknown = [{"excerpt": w, "comment": f"I do not know the word '{w}'."} for w in _content_words(summary)
                   if self.unknown(w)]
        missing = [{"excerpt": a, "comment": f"What does {a} stand for?"} for a in _acronyms(summary)]
        if self.institutions:
            seen = {m["excerpt"] for m in missing}
            for m in _INSTITUTION_RE.finditer(summary):
                name = m.group(0)
                if name not in seen:
                    seen.add(name)
                    missing.append({"excerpt": name, "comment": f"I have not heard of {name}."})
        confusing = []
        for sentence in tokenize(summary).sentences:
            comment = self.confusing(sentence.text)
            if comment:
                confusing.append({"excerpt": sentence.text, "comment": comment})
        return {"unknown_terms": unknown, "missing_contexts": missing, "confusing_sentences": confusing}


def _elementary_unknown(word: str) -> bool:
    return not is_familiar(word)


def _non_native_unknown(word: str) -> bool:
    return not is_familiar(word) and count_syllables(word) >= 3


def _attention_unknown(word: str) -> bool:
    return count_syllables(word) >= 4 or "-" in word or len(word) >= 12


def _senior_unknown(word: str) -> bool:
    return not is_familiar(word) and count_syllables(word) >= 4


READER_RULES: dict[str, ReaderRules] = {
    "elementary": ReaderRules(unknown=_elementary_unknown, subordinator_limit=2),
    "non_native": ReaderRules(
        unknown=_non_native_unknown,
        institutions=True,
        long_sentence_words=None,
        passive_limit=2,
        reduced_relatives=True,
    ),
    "attention_deficit": ReaderRules(unknown=_attention_unknown, relative_limit=2),
    "senior": ReaderRules(unknown=_senior_unknown, long_sentence_words=20),
    "learning_difficulties": ReaderRules(unknown=_elementary_unknown, subordinator_limit=2),
}


def mock_review(persona: str, summary: str) -> dict:
    return READER_RULES.get(persona, READER_RULES["elementary"]).review(summary)


_LINK_WORDS = frozenset(
    "and but or so because while although which who that where when after before since "
    "in on at for with from to by during through".split()
)


def split_sentence(sentence: str, abbreviations: frozenset[str] | None = None) -> str | None:
    """Cut a sentence into two near its midpoint; ``None`` if too short."""
    abbrevs = default_abbreviations() if abbreviations is None else abbreviations
    words = sentence.split()
    n = len(words)
    if n < 4:
        return None
    # middle-third clause breaks first, then breaks before a linking word,
    # then plain nearest-to-middle
    def rank(i: int) -> tuple[int, int, int]:
        middle = n / 3 <= i <= 2 * n / 3
        if middle and words[i - 1][-1] in ",;:":
            tier = 0
        elif middle and words[i].casefold() in _LINK_WORDS:
            tier = 1
        else:
            tier = 2
        return (tier, abs(2 * i - n), i)

    candidates = sorted(range(2, n - 1), key=rank)
    for i in candidates:
        left, right = words[i - 1], words[i]
        bare = left.rstrip(",;:")
        if not bare or not bare[-1].isalnum() or not right[0].isalnum():
            continue
        if strip_word(bare).casefold().rstrip(".") in abbrevs or bare.endswith("."):
            continue
        first = " ".join(words[:i - 1] + [bare]) + "."
        rest = " ".join(words[i:])
        rest = rest[0].upper() + rest[1:]
        if rest[-1] not in ".!?\"')”’":
            rest += "."
        return f"{first} {rest}"
    return None


def _match_case(template: str, replacement: str) -> str:
    if template[:1].isupper() and replacement[:1].islower():
        return replacement[0].upper() + replacement[1:]
    return replacement


def mock_revisions(checklist: dict) -> dict:
    revisions = []
    prefixes = {"unknown_terms": "U", "missing_contexts": "M", "confusing_sentences": "C"}
    for category in CATEGORIES:
        for n, item in enumerate(checklist.get(category, []), 1):
            excerpt = item["excerpt"]
            issue = f"{prefixes[category]}{n}"
            entry = {"issue": issue, "original": excerpt, "kind": "InsufficientInformation", "replacement": "",
                     "rationale": "The source offers nothing simpler to say here."}
            if category == "confusing_sentences":
                split = split_sentence(excerpt)
                if split:
                    entry.update(kind="RewriteSentence", replacement=split, rationale="Split the long sentence.")
            elif category == "unknown_terms":
                simple = GLOSSARY.get(excerpt.casefold())
                if simple:
                    entry.update(kind="ReplaceTerm", replacement=_match_case(excerpt, simple),
                                 rationale="Use a common word.")
            revisions.append(entry)
    return {"revisions": revisions}


def mock_classify(source: str) -> dict:
    lowered = source.casefold()
    for genre, keywords in _PLANNER_RULES:
        if any(k in lowered for k in keywords):
            return {"document_type": genre.value, "expert": genre.default_expert.value}
    return {"document_type": Genre.ACADEMIC_PAPER.value, "expert": Genre.ACADEMIC_PAPER.default_expert.value}


@dataclass
class MockResponder:
    """Callable for ``ScriptedBackend`` that answers every agent role offline."""

    overrides: dict[str, Callable[[ChatRequest, CallContext], str]] = field(default_factory=dict)

    def __call__(self, request: ChatRequest, ctx: CallContext) -> str:
        if ctx.role in self.overrides:
            return self.overrides[ctx.role](request, ctx)
        payload = ctx.payload or {}
        if ctx.role == "planner":
            return json.dumps(mock_classify(payload["source"]))
        if ctx.role == "drafter":
            return normalize_ws(payload["source"])
        if ctx.role.startswith("reader:"):
            return json.dumps(mock_review(payload["persona"], payload["summary"]))
        if ctx.role == "expert":
            return json.dumps(mock_revisions(payload["checklist"]))
        if ctx.role == "editor":
            return payload["expected"]
        raise ValueError(f"mock responder has no rule for role {ctx.role!r}")
