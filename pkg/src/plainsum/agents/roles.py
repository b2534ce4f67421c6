"""Planner, domain expert (draft and revise modes) and reader agents.

Prompt construction is a pure function of the catalog and the inputs.
Structured answers get one reprompt on a parse or schema failure, then
the call fails hard.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Callable, Iterable, Protocol, Sequence, TypeVar

from ..llm.gateway import ChatRequest, Gateway, Message
from ..llm.jsonout import JsonExtractionError, extract_json
from ..spans import contains_normalized, normalize_ws
from ..textmetrics import tokenize
from .catalog import GenreProfile, PromptCatalog, ReaderPersona
from .types import (
    ADD_CONTEXT_MAX_WORDS,
    CATEGORIES,
    REPLACE_TERM_MAX_WORDS,
    EmptyDraftError,
    ExpertRole,
    FeedbackItem,
    Genre,
    ReaderFeedback,
    RevisionKind,
    RevisionProposal,
    SchemaViolationError,
    TruncatedOutputWarning,
    UnknownLabelError,
    UnparseableClassificationError,
)

logger = logging.getLogger(__name__)

T = TypeVar("T")

DEFAULT_MODEL = "gpt-4o"
REASONING_MARKERS = ("qwen3",)


@lru_cache(maxsize=1)
def default_catalog() -> PromptCatalog:
    return PromptCatalog.load()


@dataclass(frozen=True)
class ModelSettings:
    """Decoding settings shared by every agent call.

    ``temperature=None`` picks 0.6 for reasoning models (model id contains
    one of ``reasoning_markers``) and 0.0 otherwise.
    """

    model_id: str = DEFAULT_MODEL
    temperature: float | None = None
    top_p: float = 0.95
    top_k: int = 20
    max_tokens: int = 4096
    reasoning_markers: tuple[str, ...] = REASONING_MARKERS

    @property
    def effective_temperature(self) -> float:
        if self.temperature is not None:
            return self.temperature
        lowered = self.model_id.casefold()
        return 0.6 if any(m.casefold() in lowered for m in self.reasoning_markers) else 0.0

    def request(self, system: str, user: str) -> ChatRequest:
        return ChatRequest(
            model_id=self.model_id,
            messages=(Message("system", system), Message("user", user)),
            temperature=self.effective_temperature,
            top_p=self.top_p,
            top_k=self.top_k,
            max_tokens=self.max_tokens,
        )

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "temperature": self.effective_temperature,
            "top_p": self.top_p,
            "top_k": self.top_k,
            "max_tokens": self.max_tokens,
        }


@dataclass
class AgentRuntime:
    gateway: Gateway
    settings: ModelSettings = field(default_factory=ModelSettings)
    catalog: PromptCatalog = field(default_factory=default_catalog)
    doc_id: str = ""


class _SchemaProblem(ValueError):
    """Internal signal: the reply parsed but does not fit the schema."""


def _structured_call(
    rt: AgentRuntime,
    request: ChatRequest,
    *,
    role: str,
    round_index: int,
    payload: dict,
    parse: Callable[[str], T],
    error_cls: type[SchemaViolationError] = SchemaViolationError,
) -> T:
    resp = rt.gateway.complete(request, role=role, round_index=round_index, doc_id=rt.doc_id, payload=payload)
    try:
        return parse(resp.content)
    except (JsonExtractionError, _SchemaProblem) as exc:
        first_error = exc
    logger.warning("%s reply for %s unusable (%s); reprompting once", role, rt.doc_id or "<doc>", first_error)
    retry = request.with_messages(
        Message("assistant", resp.content),
        Message("user", rt.catalog.render("reprompt", error=str(first_error))),
    )
    resp = rt.gateway.complete(
        retry, role=role, round_index=round_index, doc_id=rt.doc_id, payload={**payload, "reprompt": True}
    )
    try:
        return parse(resp.content)
    except (JsonExtractionError, _SchemaProblem) as exc:
        raise error_cls(f"{role} output unusable after reprompt: {exc}") from exc


# --- prompt builders (pure) ---------------------------------------------------------


def planner_prompt(catalog: PromptCatalog, source: str) -> tuple[str, str]:
    return catalog.render("planner_system"), catalog.render("planner_user", source=source)


def _expert_profile(catalog: PromptCatalog, expert: ExpertRole) -> GenreProfile:
    for profile in catalog.genres.values():
        if profile.expert is expert:
            return profile
    raise KeyError(f"no catalog profile for expert {expert.value}")


def _examples_block(examples: Sequence[str]) -> str:
    if not examples:
        return "(none supplied)"
    return "\n\n".join(f"Example {i}:\n{text.strip()}" for i, text in enumerate(examples, 1))


def draft_prompt(catalog: PromptCatalog, source: str, genre: Genre, expert: ExpertRole) -> tuple[str, str]:
    genre_profile = catalog.genres[genre]
    voice = _expert_profile(catalog, expert)
    system = catalog.render(
        "expert_draft_system",
        expert_title=voice.expert_title,
        genre_plural=genre_profile.genre_plural,
        role_description=voice.role_description,
        slots=genre_profile.slot_block(),
        guidelines=genre_profile.guidelines,
        min_sentences=genre_profile.min_sentences,
        max_sentences=genre_profile.max_sentences,
        examples=_examples_block(catalog.few_shot.get(genre, ())),
    )
    return system, catalog.render("expert_draft_user", source=source)


def reader_prompt(catalog: PromptCatalog, persona: ReaderPersona, summary: str) -> tuple[str, str]:
    system = catalog.render("reader_system", profile=persona.profile, flag_rules=persona.flag_rules)
    return system, catalog.render("reader_user", summary=summary)


class ChecklistLike(Protocol):
    def labeled_issues(self) -> list[tuple[str, Any]]: ...

    def to_dict(self) -> dict: ...


def checklist_block(checklist: ChecklistLike) -> str:
    lines = []
    for label, issue in checklist.labeled_issues():
        readers = "reader" if issue.flag_count == 1 else "readers"
        lines.append(f'[{label}] {issue.category} ({issue.flag_count} {readers}): "{issue.excerpt}"')
    return "\n".join(lines)


def revise_prompt(
    catalog: PromptCatalog,
    expert: ExpertRole,
    summary: str,
    checklist: ChecklistLike,
    source: str = "",
    history: Sequence[ChecklistLike] = (),
) -> tuple[str, str]:
    voice = _expert_profile(catalog, expert)
    system = catalog.render(
        "expert_revise_system", domain_phrase=voice.domain_phrase, role_description=voice.role_description
    )
    history_block = ""
    if history:
        parts = [f"Round {i}:\n{checklist_block(c)}" for i, c in enumerate(history, 1)]
        history_block = "\n\nChecklists from earlier rounds (already handled):\n" + "\n\n".join(parts)
    user = catalog.render(
        "expert_revise_user",
        source=source or "(not provided)",
        summary=summary,
        checklist=checklist_block(checklist),
        history=history_block,
    )
    return system, user


# --- planner ---------------------------------------------------------------------------


def parse_classification(content: str) -> tuple[Genre, ExpertRole]:
    data = extract_json(content)
    if not isinstance(data, dict):
        raise _SchemaProblem("expected a JSON object")
    label = data.get("document_type")
    if not isinstance(label, str) or not label.strip():
        raise _SchemaProblem("missing 'document_type'")
    genre = Genre.parse(label)
    expert_label = data.get("expert")
    if expert_label is None or (isinstance(expert_label, str) and not expert_label.strip()):
        return genre, genre.default_expert
    if not isinstance(expert_label, str):
        raise _SchemaProblem("'expert' must be a string")
    expert = ExpertRole.parse(expert_label)
    if expert is not genre.default_expert:
        logger.info("planner overrode expert for %s: %s", genre.value, expert.value)
    return genre, expert


def classify_genre(source: str, rt: AgentRuntime, *, round_index: int = 0) -> tuple[Genre, ExpertRole]:
    if not source.strip():
        raise ValueError("document text is empty")
    system, user = planner_prompt(rt.catalog, source)
    return _structured_call(
        rt,
        rt.settings.request(system, user),
        role="planner",
        round_index=round_index,
        payload={"source": source},
        parse=parse_classification,
        error_cls=UnparseableClassificationError,
    )


# --- drafter -----------------------------------------------------------------------------


def draft_initial_summary(
    source: str, genre: Genre, expert: ExpertRole, rt: AgentRuntime, *, round_index: int = 0
) -> str:
    system, user = draft_prompt(rt.catalog, source, genre, expert)
    resp = rt.gateway.complete(
        rt.settings.request(system, user),
        role="drafter",
        round_index=round_index,
        doc_id=rt.doc_id,
        payload={"source": source, "genre": genre.value, "expert": expert.value},
    )
    if resp.truncated:
        warnings.warn(f"initial draft for {rt.doc_id or '<doc>'} hit the length limit", TruncatedOutputWarning)
    draft = resp.content.strip()
    if not draft:
        raise EmptyDraftError(f"model returned an empty draft for {rt.doc_id or '<doc>'}")
    return draft


# --- readers -------------------------------------------------------------------------------


def parse_feedback(content: str, persona: str, summary: str) -> ReaderFeedback:
    data = extract_json(content)
    if not isinstance(data, dict):
        raise _SchemaProblem("expected a JSON object with the three category keys")
    lists: dict[str, tuple[FeedbackItem, ...]] = {}
    for category in CATEGORIES:
        raw = data.get(category)
        if raw is None:
            logger.warning("reader %s omitted %r; treating it as empty", persona, category)
            lists[category] = ()
            continue
        if not isinstance(raw, list):
            raise _SchemaProblem(f"{category!r} must be a list")
        items = []
        for entry in raw:
            if isinstance(entry, str):
                excerpt, comment = entry, ""
            elif isinstance(entry, dict) and isinstance(entry.get("excerpt"), str):
                excerpt = entry["excerpt"]
                comment = entry.get("comment") or ""
                if not isinstance(comment, str):
                    comment = str(comment)
            else:
                raise _SchemaProblem(f"items in {category!r} need a string 'excerpt'")
            excerpt = excerpt.strip()
            if not excerpt:
                logger.warning("reader %s returned an empty excerpt in %s; dropped", persona, category)
                continue
            items.append(FeedbackItem(excerpt, comment.strip(), contains_normalized(summary, excerpt)))
        lists[category] = tuple(items)
    return ReaderFeedback(persona=persona, **lists)


def collect_feedback(
    persona: ReaderPersona, summary: str, rt: AgentRuntime, *, round_index: int = 1
) -> ReaderFeedback:
    if not summary.strip():
        raise ValueError("cannot collect feedback on an empty summary")
    system, user = reader_prompt(rt.catalog, persona, summary)
    return _structured_call(
        rt,
        rt.settings.request(system, user),
        role=f"reader:{persona.key}",
        round_index=round_index,
        payload={"persona": persona.key, "summary": summary},
        parse=lambda content: parse_feedback(content, persona.key, summary),
    )


# --- expert revise mode ------------------------------------------------------------------------


def _truncate_words(text: str, limit: int) -> str:
    return " ".join(text.split()[:limit]).rstrip(",;:")


def _strip_context_wrapper(original: str, replacement: str) -> str:
    """Reduce ``"<original> (<explanation>)"`` style answers to the explanation."""
    rep = normalize_ws(replacement)
    orig = normalize_ws(original)
    if orig and rep.casefold().startswith(orig.casefold()):
        rep = rep[len(orig):].strip()
    rep = rep.strip(" ,;:-\u2013\u2014")
    if rep.startswith("(") and rep.endswith(")"):
        rep = rep[1:-1].strip()
    return rep


def enforce_bounds(proposal: RevisionProposal) -> RevisionProposal:
    """Apply the per-kind length rules, truncating and flagging violations."""
    kind = proposal.kind
    flags = list(proposal.flags)
    replacement = proposal.replacement
    if kind is RevisionKind.INSUFFICIENT_INFORMATION:
        replacement = ""
    elif kind is RevisionKind.REPLACE_TERM:
        if len(replacement.split()) > REPLACE_TERM_MAX_WORDS:
            replacement = _truncate_words(replacement, REPLACE_TERM_MAX_WORDS)
            flags.append("truncated")
    elif kind is RevisionKind.ADD_CONTEXT:
        replacement = _strip_context_wrapper(proposal.original, replacement)
        if len(replacement.split()) > ADD_CONTEXT_MAX_WORDS:
            replacement = _truncate_words(replacement, ADD_CONTEXT_MAX_WORDS)
            flags.append("truncated")
    elif kind is RevisionKind.REWRITE_SENTENCE:
        limit = len(proposal.original.split())
        if replacement.strip() and limit:
            sentences = tokenize(replacement).sentences
            if any(s.word_count >= limit for s in sentences):
                flags.append("not_shorter")
    flags = tuple(dict.fromkeys(flags))
    if replacement == proposal.replacement and flags == proposal.flags:
        return proposal
    return RevisionProposal(
        kind=kind,
        original=proposal.original,
        replacement=replacement,
        rationale=proposal.rationale,
        source_issue=proposal.source_issue,
        flags=flags,
    )


def parse_proposals(content: str, checklist: ChecklistLike) -> list[RevisionProposal]:
    data = extract_json(content)
    if isinstance(data, dict):
        raw = data.get("revisions")
        if raw is None:
            raise _SchemaProblem("missing 'revisions' list")
    else:
        raw = data
    if not isinstance(raw, list):
        raise _SchemaProblem("'revisions' must be a list")
    labels = dict(checklist.labeled_issues())
    by_identity = {issue.identity: issue for issue in labels.values()}
    out = []
    for entry in raw:
        if not isinstance(entry, dict):
            raise _SchemaProblem("each revision must be an object")
        try:
            kind = RevisionKind.parse(entry.get("kind", ""))
        except UnknownLabelError as exc:
            raise _SchemaProblem(str(exc)) from exc
        issue_ref = str(entry.get("issue") or entry.get("id") or "").strip()
        issue = labels.get(issue_ref.upper()) or by_identity.get(issue_ref)
        original = entry.get("original")
        if original is None and issue is not None:
            original = issue.excerpt
        if not isinstance(original, str):
            raise _SchemaProblem("'original' must be a string")
        replacement = entry.get("replacement") or ""
        if not isinstance(replacement, str):
            raise _SchemaProblem("'replacement' must be a string")
        if kind is not RevisionKind.INSUFFICIENT_INFORMATION:
            if not original.strip():
                raise _SchemaProblem(f"{kind.value} needs a non-empty 'original'")
            if not replacement.strip():
                raise _SchemaProblem(f"{kind.value} needs a non-empty 'replacement'")
        proposal = RevisionProposal(
            kind=kind,
            original=original.strip(),
            replacement=replacement.strip(),
            rationale=str(entry.get("rationale") or "").strip(),
            source_issue=issue.identity if issue is not None else "",
        )
        bounded = enforce_bounds(proposal)
        if bounded.kind is RevisionKind.ADD_CONTEXT and not bounded.replacement:
            raise _SchemaProblem("AddContext replacement carries no explanation")
        out.append(bounded)
    return out


def propose_revisions(
    expert: ExpertRole,
    summary: str,
    checklist: ChecklistLike,
    rt: AgentRuntime,
    *,
    round_index: int = 1,
    source: str = "",
    history: Sequence[ChecklistLike] = (),
) -> list[RevisionProposal]:
    if not checklist.labeled_issues():
        raise ValueError("propose_revisions needs a non-empty checklist")
    system, user = revise_prompt(rt.catalog, expert, summary, checklist, source, history)
    proposals = _structured_call(
        rt,
        rt.settings.request(system, user),
        role="expert",
        round_index=round_index,
        payload={"expert": expert.value, "summary": summary, "checklist": checklist.to_dict(), "source": source},
        parse=lambda content: parse_proposals(content, checklist),
    )
    if not proposals:
        logger.warning("expert proposed no revisions for %s round %d", rt.doc_id or "<doc>", round_index)
    return proposals


def resolve_personas(names: Iterable[str], catalog: PromptCatalog | None = None) -> tuple[ReaderPersona, ...]:
    return (catalog or default_catalog()).registry().resolve(names)
