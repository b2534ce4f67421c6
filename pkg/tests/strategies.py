"""Hypothesis strategies and brute-force oracles shared by several test files."""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass

from hypothesis import strategies as st

from plainsum.agents.types import CATEGORIES, FeedbackItem, ReaderFeedback, RevisionKind, RevisionProposal
from tests.oracles import readability_oracle as oracle

PERSONAS = ("elementary", "non_native", "attention_deficit")

# A "qz" prefix keeps generated words clear of the abbreviation guard list.
word = st.text("abcdefghijklmnopqrstuvwxyz", min_size=1, max_size=10).map(lambda s: "qz" + s)


@dataclass
class ChecklistCase:
    summary: str
    sentences: list[list[str]]
    feedbacks: list[ReaderFeedback]


@st.composite
def checklist_cases(draw, max_per_category: int = 6) -> ChecklistCase:
    n_sent = draw(st.integers(1, 4))
    vocab = draw(st.lists(word, min_size=n_sent * 2, max_size=n_sent * 2 + 18, unique=True))
    cuts = sorted(draw(st.lists(st.integers(1, len(vocab) - 1), min_size=n_sent - 1, max_size=n_sent - 1, unique=True)))
    bounds = [0, *cuts, len(vocab)]
    sentences = [vocab[a:b] for a, b in zip(bounds, bounds[1:])]
    summary = " ".join(" ".join(s) + "." for s in sentences)

    active = draw(st.integers(1, 3))
    personas = PERSONAS[:active]
    per_persona: dict[str, dict[str, list[str]]] = {p: {c: [] for c in CATEGORIES} for p in personas}
    for category in CATEGORIES:
        pool = draw(st.lists(st.sampled_from(vocab), max_size=max_per_category, unique=True))
        for excerpt in pool:
            # at least one persona flags every pooled excerpt
            flaggers = draw(st.lists(st.sampled_from(personas), min_size=1, unique=True))
            for p in flaggers:
                per_persona[p][category].append(excerpt)
    feedbacks = []
    for p in personas:
        lists = {}
        for c in CATEGORIES:
            excerpts = draw(st.permutations(per_persona[p][c]))
            lists[c] = tuple(FeedbackItem(e, "", True) for e in excerpts)
        feedbacks.append(ReaderFeedback(p, **lists))
    return ChecklistCase(summary, sentences, draw(st.permutations(feedbacks)))


def oracle_ranking(case: ChecklistCase, category: str) -> list[str]:
    """Brute-force order: the unique permutation sorted on (flags desc, ARI desc, position asc)."""
    flags: dict[str, int] = {}
    for fb in case.feedbacks:
        for item in fb.items(category):
            flags[item.excerpt] = flags.get(item.excerpt, 0) + 1
    facts = {}
    for excerpt, count in flags.items():
        position = re.search(rf"(?<![A-Za-z]){re.escape(excerpt)}(?![A-Za-z])", case.summary).start()
        sentence = next(s for s in case.sentences if excerpt in s)
        chars = sum(len(w) for w in sentence)  # punctuation is not counted
        facts[excerpt] = (count, oracle.ari(len(sentence), 1, chars), position)

    def before(a: str, b: str) -> bool:
        fa, fb_ = facts[a], facts[b]
        if fa[0] != fb_[0]:
            return fa[0] > fb_[0]
        if fa[1] != fb_[1]:
            return fa[1] > fb_[1]
        return fa[2] < fb_[2]

    for perm in itertools.permutations(facts):
        if all(before(perm[i], perm[i + 1]) for i in range(len(perm) - 1)):
            return list(perm)
    assert not facts
    return []


# --- editor -------------------------------------------------------------------------

filler = st.sampled_from("alpha bravo charlie delta echo foxtrot golf hotel india juliet kilo lima".split())


@st.composite
def proposal_sets(draw):
    words = draw(st.lists(filler, min_size=3, max_size=30))
    summary = " ".join(words) + "."
    proposals = []
    for _ in range(draw(st.integers(0, 8))):
        kind = draw(st.sampled_from(list(RevisionKind)))
        if draw(st.booleans()):
            a = draw(st.integers(0, len(words) - 1))
            b = draw(st.integers(a + 1, min(len(words), a + 6)))
            original = " ".join(words[a:b])
        else:
            original = draw(st.sampled_from(["zulu", "missing words", "alpha zulu"]))
        max_words = {RevisionKind.REPLACE_TERM: 9, RevisionKind.ADD_CONTEXT: 25}.get(kind, 8)
        replacement = " ".join(draw(st.lists(st.sampled_from(["new", "text", "x", "yy"]), min_size=1, max_size=max_words)))
        proposals.append(RevisionProposal(kind, original, replacement))
    return summary, proposals
