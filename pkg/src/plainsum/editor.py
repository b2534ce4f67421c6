"""Two-phase, conflict-safe application of revision proposals.

``plan_edits`` anchors every proposal at the first whitespace-normalized,
case-sensitive occurrence of its original span that does not start or
end inside a word.  Overlapping anchors are resolved in favour of the
longer span.  ``apply_edits`` then performs the surviving edits in
ascending position, re-checking each anchor against the partly edited
text.
"""

from __future__ import annotations

import hashlib
import logging
import re
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .agents.roles import AgentRuntime, enforce_bounds
from .agents.types import AgentError, RevisionKind, RevisionProposal
from .spans import find_span, find_word_span

logger = logging.getLogger(__name__)


class StalePlanError(ValueError):
    """The plan was built from a different summary text."""


class EditStatus(str, Enum):
    APPLIED = "Applied"
    SKIPPED_ANCHOR_MISSING = "SkippedAnchorMissing"
    SKIPPED_OVERLAP = "SkippedOverlap"
    SKIPPED_INSUFFICIENT_INFO = "SkippedInsufficientInfo"
    # llm editor mode only: planned and rendered, but absent from the model's text
    SKIPPED_BY_EDITOR = "SkippedByEditor"


def text_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


# Anchors respect word edges: "use" never matches inside "because".
find_anchor = find_word_span


@dataclass(frozen=True)
class PlannedEdit:
    index: int
    proposal: RevisionProposal
    start: int
    end: int


@dataclass(frozen=True)
class EditPlan:
    summary_hash: str
    proposals: tuple[RevisionProposal, ...]
    edits: tuple[PlannedEdit, ...]
    excluded: tuple[tuple[int, EditStatus], ...]

    def __len__(self) -> int:
        return len(self.edits)


@dataclass(frozen=True)
class EditOutcome:
    index: int
    proposal: RevisionProposal
    status: EditStatus
    pre_offset: int | None = None
    pre_end: int | None = None
    post_offset: int | None = None
    rendered: str = ""

    @property
    def resulting_span(self) -> tuple[int, int] | None:
        if self.status is not EditStatus.APPLIED or self.post_offset is None:
            return None
        return self.post_offset, len(self.rendered)

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "kind": self.proposal.kind.value,
            "original": self.proposal.original,
            "replacement": self.proposal.replacement,
            "rationale": self.proposal.rationale,
            "rendered": self.rendered,
            "status": self.status.value,
            "pre_offset": self.pre_offset,
            "pre_end": self.pre_end,
            "post_offset": self.post_offset,
            "source_issue": self.proposal.source_issue,
            "flags": list(self.proposal.flags),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EditOutcome":
        proposal = RevisionProposal(
            kind=RevisionKind(data["kind"]),
            original=data["original"],
            replacement=data["replacement"],
            rationale=data.get("rationale", ""),
            source_issue=data.get("source_issue", ""),
            flags=tuple(data.get("flags", ())),
        )
        return cls(
            index=int(data["index"]),
            proposal=proposal,
            status=EditStatus(data["status"]),
            pre_offset=data.get("pre_offset"),
            pre_end=data.get("pre_end"),
            post_offset=data.get("post_offset"),
            rendered=data.get("rendered", ""),
        )


def _overlaps(a: tuple[int, int], b: tuple[int, int]) -> bool:
    return a[0] < b[1] and b[0] < a[1]


def plan_edits(summary: str, proposals: Sequence[RevisionProposal]) -> EditPlan:
    # length bounds are re-applied here so hand-built proposals obey them too
    proposals = [enforce_bounds(p) for p in proposals]
    excluded: dict[int, EditStatus] = {}
    candidates: list[PlannedEdit] = []
    for i, p in enumerate(proposals):
        if p.kind is RevisionKind.INSUFFICIENT_INFORMATION:
            excluded[i] = EditStatus.SKIPPED_INSUFFICIENT_INFO
            continue
        span = find_anchor(summary, p.original)
        if span is None:
            excluded[i] = EditStatus.SKIPPED_ANCHOR_MISSING
            continue
        candidates.append(PlannedEdit(i, p, span[0], span[1]))

    accepted: list[PlannedEdit] = []
    for c in sorted(candidates, key=lambda c: (-(c.end - c.start), c.start, c.index)):
        if any(_overlaps((c.start, c.end), (a.start, a.end)) for a in accepted):
            excluded[c.index] = EditStatus.SKIPPED_OVERLAP
        else:
            accepted.append(c)
    accepted.sort(key=lambda c: (c.start, c.index))
    return EditPlan(
        summary_hash=text_hash(summary),
        proposals=tuple(proposals),
        edits=tuple(accepted),
        excluded=tuple(sorted(excluded.items())),
    )


_TRAILING_TERMINAL = re.compile(r"[.!?]+[\"'”’)\]]*$")


def _match_case(matched: str, replacement: str) -> str:
    if matched[:1].isupper() and replacement[:1].islower():
        return replacement[0].upper() + replacement[1:]
    return replacement


def render(proposal: RevisionProposal, matched: str) -> str:
    """Text that replaces ``matched`` (the anchored span) for this proposal."""
    if proposal.kind is RevisionKind.ADD_CONTEXT:
        explanation = proposal.replacement.strip().rstrip(".!?").strip()
        if not explanation:
            return matched
        tail_match = _TRAILING_TERMINAL.search(matched)
        core, tail = (matched[: tail_match.start()], tail_match.group(0)) if tail_match else (matched, "")
        return f"{core} ({explanation}){tail}"
    return _match_case(matched, proposal.replacement)


def apply_edits(summary: str, plan: EditPlan) -> tuple[str, list[EditOutcome]]:
    if text_hash(summary) != plan.summary_hash:
        raise StalePlanError("summary does not match the text the plan was built from")
    outcomes: dict[int, EditOutcome] = {
        i: EditOutcome(i, plan.proposals[i], status) for i, status in plan.excluded
    }
    text = summary
    shift = 0
    last_end = 0
    for edit in plan.edits:
        original = edit.proposal.original
        expected = edit.start + shift
        span = find_span(text, original, expected)
        if span is None or span[0] != expected:
            span = find_anchor(text, original, last_end)
        if span is None:
            logger.info("anchor for edit %d vanished after earlier edits", edit.index)
            outcomes[edit.index] = EditOutcome(edit.index, edit.proposal, EditStatus.SKIPPED_ANCHOR_MISSING)
            continue
        b, e = span
        rendered = render(edit.proposal, text[b:e])
        text = text[:b] + rendered + text[e:]
        outcomes[edit.index] = EditOutcome(
            edit.index,
            edit.proposal,
            EditStatus.APPLIED,
            pre_offset=b - shift,
            pre_end=e - shift,
            post_offset=b,
            rendered=rendered,
        )
        shift += len(rendered) - (e - b)
        last_end = b + len(rendered)
    return text, [outcomes[i] for i in range(len(plan.proposals))]


def _edit_list(outcomes: Sequence[EditOutcome]) -> str:
    lines = []
    for n, o in enumerate((o for o in outcomes if o.status is EditStatus.APPLIED), 1):
        lines.append(f'{n}. Replace: "{o.proposal.original}"\n   With: "{o.rendered}"')
    return "\n".join(lines)


def edit_with_llm(
    summary: str, plan: EditPlan, rt: AgentRuntime, *, round_index: int
) -> tuple[str, list[EditOutcome]]:
    """Pass the approved edits through the editor prompt.

    The deterministic result is computed first and its rendered edits are
    what the model is asked to apply.  Each applied edit is then looked up
    in the model's text; edits the model dropped become ``SkippedByEditor``.
    No call is made when nothing is planned.
    """
    expected, outcomes = apply_edits(summary, plan)
    if not plan.edits:
        return expected, outcomes
    catalog = rt.catalog
    edits = _edit_list(outcomes)
    request = rt.settings.request(
        catalog.render("editor_system"), catalog.render("editor_user", summary=summary, edits=edits)
    )
    resp = rt.gateway.complete(
        request,
        role="editor",
        round_index=round_index,
        doc_id=rt.doc_id,
        payload={"summary": summary, "edits": edits, "expected": expected},
    )
    revised = resp.content.strip()
    if not revised:
        raise AgentError(f"editor returned empty text for {rt.doc_id or '<doc>'}")
    located = {o.index: o for o in outcomes}
    cursor = 0
    applied = [o for o in outcomes if o.status is EditStatus.APPLIED]
    for o in sorted(applied, key=lambda o: o.post_offset):
        span = find_span(revised, o.rendered, cursor) if o.rendered.strip() else None
        if span is None:
            located[o.index] = EditOutcome(o.index, o.proposal, EditStatus.SKIPPED_BY_EDITOR, o.pre_offset, o.pre_end)
            continue
        cursor = span[1]
        located[o.index] = EditOutcome(
            o.index, o.proposal, EditStatus.APPLIED, o.pre_offset, o.pre_end, span[0], revised[span[0]:span[1]]
        )
    return revised, [located[o.index] for o in outcomes]
