"""Tokenization and formula-based readability / relevance metrics.

Every function here is pure.  The readability formulas take a
:class:`TokenizedText` so that counts are computed once and the same
counts can be handed to an independent checker.

Formulas (standard published coefficients)::

    FKGL = 0.39 * W/S + 11.8 * Syl/W - 15.59
    DCRS = 0.1579 * PDW + 0.0496 * W/S  (+ 3.6365 when PDW > 5)
    CLI  = 0.0588 * L - 0.296 * S100 - 15.8
    ARI  = 4.71 * C/W + 0.5 * W/S - 21.43

where PDW is the percentage of words outside the familiar-word list,
L the letters per 100 words, S100 the sentences per 100 words, and C
the non-whitespace characters of the word tokens.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable

__all__ = [
    "Sentence",
    "TokenizedText",
    "ReadabilityReport",
    "RougeScore",
    "UndefinedMetricError",
    "tokenize",
    "count_syllables",
    "strip_word",
    "fkgl",
    "dcrs",
    "cli",
    "ari",
    "readability",
    "rouge1",
    "load_word_list",
    "default_familiar_words",
    "default_abbreviations",
]


class UndefinedMetricError(ValueError):
    """A readability formula was asked to score text with no sentences/words."""


@dataclass(frozen=True)
class Sentence:
    text: str
    start: int
    words: tuple[str, ...]
    word_count: int
    letter_count: int
    char_count: int
    syllable_count: int


@dataclass(frozen=True)
class TokenizedText:
    sentences: tuple[Sentence, ...]

    @property
    def sentence_count(self) -> int:
        return len(self.sentences)

    @property
    def word_count(self) -> int:
        return sum(s.word_count for s in self.sentences)

    @property
    def letter_count(self) -> int:
        return sum(s.letter_count for s in self.sentences)

    @property
    def char_count(self) -> int:
        return sum(s.char_count for s in self.sentences)

    @property
    def syllable_count(self) -> int:
        return sum(s.syllable_count for s in self.sentences)

    @property
    def words(self) -> list[str]:
        return [w for s in self.sentences for w in s.words]


@dataclass(frozen=True)
class ReadabilityReport:
    fkgl: float
    dcrs: float
    cli: float
    ari: float
    word_count: int
    sentence_count: int

    def to_dict(self) -> dict:
        return {
            "fkgl": self.fkgl,
            "dcrs": self.dcrs,
            "cli": self.cli,
            "ari": self.ari,
            "word_count": self.word_count,
            "sentence_count": self.sentence_count,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ReadabilityReport":
        return cls(
            fkgl=float(data["fkgl"]),
            dcrs=float(data["dcrs"]),
            cli=float(data["cli"]),
            ari=float(data["ari"]),
            word_count=int(data["word_count"]),
            sentence_count=int(data["sentence_count"]),
        )


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f1: float

    def to_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1}

    @classmethod
    def from_dict(cls, data: dict) -> "RougeScore":
        return cls(float(data["precision"]), float(data["recall"]), float(data["f1"]))


# ---------------------------------------------------------------------------
# word lists


def load_word_list(path: str | Path) -> frozenset[str]:
    """Read a one-entry-per-line UTF-8 list; blank lines and ``#`` comments skipped."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return _parse_word_list(lines)


def _parse_word_list(lines: Iterable[str]) -> frozenset[str]:
    out = set()
    for line in lines:
        item = line.strip()
        if item and not item.startswith("#"):
            out.add(item.casefold())
    return frozenset(out)


def _packaged_list(name: str) -> frozenset[str]:
    text = resources.files("plainsum").joinpath("data").joinpath(name).read_text(encoding="utf-8")
    return _parse_word_list(text.splitlines())


@lru_cache(maxsize=None)
def default_familiar_words() -> frozenset[str]:
    """The packaged Dale-Chall familiar-word list (about 2,940 entries)."""
    return _packaged_list("dale_chall.txt")


@lru_cache(maxsize=None)
def default_abbreviations() -> frozenset[str]:
    """Abbreviations whose trailing period does not end a sentence (stored without it)."""
    return _packaged_list("abbreviations.txt")


# ---------------------------------------------------------------------------
# tokenization

# terminal punctuation, optional closing quotes/brackets, then whitespace or end
_BOUNDARY_RE = re.compile(r"[.!?]+[\"'”’)\]]*(?=\s|$)")
_VOWEL_GROUP_RE = re.compile(r"[aeiouy]+")
_VOWELS = frozenset("aeiouy")


def strip_word(token: str) -> str:
    """Strip leading/trailing characters that are not letters or digits."""
    start, end = 0, len(token)
    while start < end and not token[start].isalnum():
        start += 1
    while end > start and not token[end - 1].isalnum():
        end -= 1
    return token[start:end]


def _is_guarded(text: str, dot_end: int, abbreviations: frozenset[str]) -> bool:
    # dot_end is the index just after the boundary punctuation run
    chunk_start = dot_end
    while chunk_start > 0 and not text[chunk_start - 1].isspace():
        chunk_start -= 1
    chunk = text[chunk_start:dot_end]
    if not chunk.endswith("."):
        return False
    body = chunk[:-1]
    while body and not body[0].isalnum():
        body = body[1:]
    return body.casefold() in abbreviations


def _split_sentences(text: str, abbreviations: frozenset[str]) -> list[tuple[int, str]]:
    pieces: list[tuple[int, str]] = []
    cursor = 0
    for m in _BOUNDARY_RE.finditer(text):
        end = m.end()
        punct_end = m.start() + len(m.group(0).rstrip("\"'”’)]"))
        if _is_guarded(text, punct_end, abbreviations):
            continue
        pieces.append((cursor, text[cursor:end]))
        cursor = end
    if cursor < len(text):
        pieces.append((cursor, text[cursor:]))
    out = []
    for start, raw in pieces:
        lead = len(raw) - len(raw.lstrip())
        stripped = raw.strip()
        if stripped:
            out.append((start + lead, stripped))
    return out


def count_syllables(word: str) -> int:
    """Vowel-group syllable estimate with a silent-``e`` rule and a floor of 1.

    >>> count_syllables("because"), count_syllables("table"), count_syllables("a")
    (2, 2, 1)
    """
    w = word.casefold()
    n = len(_VOWEL_GROUP_RE.findall(w))
    if w.endswith("e"):
        consonant_le = w.endswith("le") and len(w) > 2 and w[-3] not in _VOWELS
        if not consonant_le:
            n -= 1
    return max(1, n)


def _make_sentence(start: int, raw: str) -> Sentence | None:
    words = tuple(w for w in (strip_word(t) for t in raw.split()) if w)
    if not words:
        return None
    return Sentence(
        text=raw,
        start=start,
        words=words,
        word_count=len(words),
        letter_count=sum(ch.isalpha() for w in words for ch in w),
        char_count=sum(len(w) for w in words),
        syllable_count=sum(count_syllables(w) for w in words),
    )


def tokenize(text: str, abbreviations: frozenset[str] | None = None) -> TokenizedText:
    """Split text into sentences and word tokens.

    Sentences end at ``.``, ``!`` or ``?`` followed by whitespace or the
    end of the text, unless the period closes a guarded abbreviation
    ("Dr.", "e.g.").  Words are whitespace-separated tokens with leading
    and trailing punctuation removed; sentences without words are dropped.
    """
    abbrevs = default_abbreviations() if abbreviations is None else abbreviations
    sentences = []
    for start, raw in _split_sentences(text, abbrevs):
        sent = _make_sentence(start, raw)
        if sent is not None:
            sentences.append(sent)
    return TokenizedText(tuple(sentences))


# ---------------------------------------------------------------------------
# readability formulas


def _require(t: TokenizedText, name: str) -> tuple[int, int]:
    s, w = t.sentence_count, t.word_count
    if s == 0 or w == 0:
        raise UndefinedMetricError(f"{name} is undefined for text with no sentences")
    return s, w


def fkgl(t: TokenizedText) -> float:
    s, w = _require(t, "FKGL")
    return 0.39 * (w / s) + 11.8 * (t.syllable_count / w) - 15.59


def dcrs(t: TokenizedText, familiar_words: frozenset[str] | None = None) -> float:
    familiar = default_familiar_words() if familiar_words is None else familiar_words
    if not familiar:
        raise ValueError("familiar word list is empty")
    s, w = _require(t, "DCRS")
    unfamiliar = sum(1 for word in t.words if word.casefold() not in familiar)
    pct = 100 * unfamiliar / w
    score = 0.1579 * pct + 0.0496 * (w / s)
    if pct > 5:
        score += 3.6365
    return score


def cli(t: TokenizedText) -> float:
    s, w = _require(t, "CLI")
    letters_per_100 = 100 * t.letter_count / w
    sentences_per_100 = 100 * s / w
    return 0.0588 * letters_per_100 - 0.296 * sentences_per_100 - 15.8


def ari(t: TokenizedText) -> float:
    s, w = _require(t, "ARI")
    return 4.71 * (t.char_count / w) + 0.5 * (w / s) - 21.43


def readability(
    text: str | TokenizedText,
    familiar_words: frozenset[str] | None = None,
) -> ReadabilityReport:
    t = tokenize(text) if isinstance(text, str) else text
    return ReadabilityReport(
        fkgl=fkgl(t),
        dcrs=dcrs(t, familiar_words),
        cli=cli(t),
        ari=ari(t),
        word_count=t.word_count,
        sentence_count=t.sentence_count,
    )


# ---------------------------------------------------------------------------
# ROUGE-1


def _unigrams(text: str, stem: bool) -> list[str]:
    tokens = [strip_word(t).casefold() for t in text.split()]
    tokens = [t for t in tokens if t]
    if stem:
        stemmer = _porter()
        tokens = [stemmer(t) for t in tokens]
    return tokens


@lru_cache(maxsize=1)
def _porter():
    try:
        from nltk.stem.porter import PorterStemmer
    except ImportError as exc:  # pragma: no cover - depends on optional extra
        raise ImportError("ROUGE stemming needs nltk: pip install 'plainsum[stem]'") from exc
    return PorterStemmer().stem


def rouge1(candidate: str, reference: str, stem: bool = False) -> RougeScore:
    """Unigram-overlap precision/recall/F1 on case-folded, punctuation-stripped tokens."""
    cand = Counter(_unigrams(candidate, stem))
    ref = Counter(_unigrams(reference, stem))
    overlap = sum((cand & ref).values())
    n_cand, n_ref = sum(cand.values()), sum(ref.values())
    precision = overlap / n_cand if n_cand else 0.0
    recall = overlap / n_ref if n_ref else 0.0
    if precision + recall == 0:
        return RougeScore(precision, recall, 0.0)
    f1 = 2 * precision * recall / (precision + recall)
    return RougeScore(precision, recall, f1)
