from __future__ import annotations

import json
import warnings

import pytest

from plainsum.agents import (
    AgentRuntime,
    EmptyDraftError,
    ExpertRole,
    Genre,
    PersonaRegistry,
    PromptCatalog,
    ReaderPersona,
    RevisionKind,
    RevisionProposal,
    SchemaViolationError,
    TruncatedOutputWarning,
    UnknownLabelError,
    UnknownPersonaError,
    UnparseableClassificationError,
    classify_genre,
    collect_feedback,
    default_catalog,
    draft_initial_summary,
    enforce_bounds,
    propose_revisions,
)
from plainsum.agents.mock import MockResponder, mock_review, split_sentence
from plainsum.agents.roles import checklist_block, draft_prompt, planner_prompt, reader_prompt, revise_prompt
from plainsum.checklist import aggregate
from plainsum.llm import ChatResponse, Gateway, ScriptedBackend
from plainsum.agents.types import ReaderFeedback, FeedbackItem


def runtime(script) -> AgentRuntime:
    return AgentRuntime(Gateway(ScriptedBackend(script)), doc_id="d1")


def persona(key: str = "elementary") -> ReaderPersona:
    return default_catalog().registry().get(key)


def words(n: int, stem: str = "word") -> str:
    return " ".join(f"{stem}{i}" for i in range(n))


# --- planner -------------------------------------------------------------------


def test_classify_passthrough():
    rt = runtime('{"document_type":"Policy Report","expert":"Policy"}')
    assert classify_genre("Some report.", rt) == (Genre.POLICY_REPORT, ExpertRole.POLICY)
    assert rt.gateway.ledger.total_calls == 1


def test_classify_falls_back_to_fixed_mapping():
    rt = runtime('{"document_type":"Patent Document"}')
    assert classify_genre("A device.", rt) == (Genre.PATENT_DOCUMENT, ExpertRole.PATENT)


@pytest.mark.parametrize(
    "genre, expert",
    [
        (Genre.ACADEMIC_PAPER, ExpertRole.BIOMEDICAL),
        (Genre.POLICY_REPORT, ExpertRole.POLICY),
        (Genre.LEGISLATIVE_BILL, ExpertRole.LEGAL),
        (Genre.PATENT_DOCUMENT, ExpertRole.PATENT),
    ],
)
def test_default_expert_mapping(genre, expert):
    assert genre.default_expert is expert


def test_classify_tolerates_prose_and_label_variants():
    rt = runtime('Sure! ```json\n{"document_type": "legislative bill", "expert": "Legal Expert"}\n```')
    assert classify_genre("This bill amends.", rt) == (Genre.LEGISLATIVE_BILL, ExpertRole.LEGAL)


def test_classify_explicit_override_is_kept():
    rt = runtime('{"document_type":"Academic Paper","expert":"Policy"}')
    assert classify_genre("x.", rt) == (Genre.ACADEMIC_PAPER, ExpertRole.POLICY)


def test_unknown_label_fails_without_reprompt():
    rt = runtime('{"document_type":"Cookbook"}')
    with pytest.raises(UnknownLabelError):
        classify_genre("x.", rt)
    assert rt.gateway.ledger.total_calls == 1


def test_unparseable_planner_reprompts_once_then_fails():
    rt = runtime(["not json", "still not json"])
    with pytest.raises(UnparseableClassificationError):
        classify_genre("x.", rt)
    assert rt.gateway.ledger.total_calls == 2


def test_reprompt_recovers_and_carries_history():
    seen = []

    def script(req, ctx):
        seen.append(req)
        return "oops" if len(seen) == 1 else '{"document_type":"Policy Report"}'

    rt = runtime(script)
    assert classify_genre("x.", rt) == (Genre.POLICY_REPORT, ExpertRole.POLICY)
    retry = seen[1]
    assert [m.role for m in retry.messages[-2:]] == ["assistant", "user"]
    assert retry.messages[-2].content == "oops"
    assert rt.gateway.ledger.total_calls == 2


# --- drafter -------------------------------------------------------------------


def test_draft_passthrough():
    para = "One. Two. Three. Four. Five."
    rt = runtime(para)
    assert draft_initial_summary("src", Genre.POLICY_REPORT, ExpertRole.POLICY, rt) == para


def test_whitespace_draft_is_an_error():
    rt = runtime("   \n ")
    with pytest.raises(EmptyDraftError):
        draft_initial_summary("src", Genre.POLICY_REPORT, ExpertRole.POLICY, rt)


def test_truncated_draft_warns_but_returns():
    rt = runtime([ChatResponse("Partial text", backend="scripted", truncated=True)])
    with pytest.warns(TruncatedOutputWarning):
        assert draft_initial_summary("src", Genre.ACADEMIC_PAPER, ExpertRole.BIOMEDICAL, rt) == "Partial text"


def test_draft_prompt_uses_genre_slots():
    system, user = draft_prompt(default_catalog(), "SOURCE TEXT", Genre.POLICY_REPORT, ExpertRole.POLICY)
    assert "What GAO Found" in system + user
    assert "SOURCE TEXT" in user
    system, _ = draft_prompt(default_catalog(), "s", Genre.PATENT_DOCUMENT, ExpertRole.PATENT)
    assert "Technical Field" in system


# --- readers -------------------------------------------------------------------

TAX_PAYLOAD = json.dumps(
    {
        "unknown_terms": [{"excerpt": "tax expenditures", "comment": "I don't know this word"}],
        "missing_contexts": [],
        "confusing_sentences": [],
    }
)


def test_feedback_anchored():
    fb = collect_feedback(persona(), "Congress reviews tax expenditures rarely.", runtime(TAX_PAYLOAD))
    assert len(fb.unknown_terms) == 1
    item = fb.unknown_terms[0]
    assert item.excerpt == "tax expenditures" and item.anchored
    assert fb.missing_contexts == () and fb.confusing_sentences == ()


def test_feedback_unanchored_when_excerpt_absent():
    fb = collect_feedback(persona(), "Congress reviews spending rarely.", runtime(TAX_PAYLOAD))
    assert fb.unknown_terms[0].anchored is False


def test_feedback_missing_category_is_empty():
    fb = collect_feedback(persona(), "A b.", runtime('{"unknown_terms": []}'))
    assert fb.missing_contexts == () and fb.confusing_sentences == ()


def test_feedback_schema_violation_after_reprompt():
    rt = runtime(['{"unknown_terms": "oops"}', '{"unknown_terms": 3}'])
    with pytest.raises(SchemaViolationError):
        collect_feedback(persona(), "Text here.", rt)
    assert rt.gateway.ledger.total_calls == 2


def test_feedback_role_names_persona():
    rt = runtime(TAX_PAYLOAD)
    collect_feedback(persona("non_native"), "tax expenditures.", rt, round_index=2)
    rec = rt.gateway.ledger.records[0]
    assert (rec.agent_role, rec.round_index) == ("reader:non_native", 2)


def test_mock_elementary_flags_20_word_sentence():
    long = "The " + " ".join(["big"] * 18) + " dog."
    assert len(long.split()) == 20
    summary = f"I ran. {long} We sat."
    out = mock_review("elementary", summary)
    assert [i["excerpt"] for i in out["confusing_sentences"]] == [long]


def test_mock_elementary_keeps_short_sentences():
    out = mock_review("elementary", "The dog ran home. We sat down.")
    assert out["confusing_sentences"] == []


def test_mock_readers_flag_acronyms_as_missing_context():
    for key in ("elementary", "non_native", "attention_deficit"):
        out = mock_review(key, "The GAO wrote a report.")
        assert "GAO" in [i["excerpt"] for i in out["missing_contexts"]]


# --- expert --------------------------------------------------------------------


def _checklist(summary: str):
    fb = ReaderFeedback(
        "elementary",
        unknown_terms=(FeedbackItem("hypertension", "", True),),
        missing_contexts=(),
        confusing_sentences=(),
    )
    return aggregate([fb], summary)


def test_replace_term_passthrough():
    summary = "Patients had hypertension."
    reply = '{"revisions":[{"issue":"U1","kind":"ReplaceTerm","original":"hypertension","replacement":"high blood pressure"}]}'
    (p,) = propose_revisions(ExpertRole.BIOMEDICAL, summary, _checklist(summary), runtime(reply))
    assert p.kind is RevisionKind.REPLACE_TERM
    assert p.replacement == "high blood pressure" and p.flags == ()
    assert p.source_issue.startswith("unknown_terms")


def test_add_context_truncated_to_15_words():
    summary = "Patients had hypertension."
    reply = json.dumps({"revisions": [{"kind": "AddContext", "original": "hypertension", "replacement": words(20)}]})
    (p,) = propose_revisions(ExpertRole.BIOMEDICAL, summary, _checklist(summary), runtime(reply))
    assert len(p.replacement.split()) == 15
    assert "truncated" in p.flags


def test_replace_term_truncated_to_5_words():
    p = enforce_bounds(RevisionProposal(RevisionKind.REPLACE_TERM, "x", words(9)))
    assert len(p.replacement.split()) == 5 and "truncated" in p.flags


def test_insufficient_information_has_empty_replacement():
    summary = "Patients had hypertension."
    reply = '{"revisions":[{"issue":"U1","kind":"InsufficientInformation","replacement":"ignored"}]}'
    (p,) = propose_revisions(ExpertRole.BIOMEDICAL, summary, _checklist(summary), runtime(reply))
    assert p.kind is RevisionKind.INSUFFICIENT_INFORMATION
    assert p.replacement == "" and p.original == "hypertension"


def test_rewrite_not_shorter_is_flagged():
    p = enforce_bounds(RevisionProposal(RevisionKind.REWRITE_SENTENCE, "a b c d.", "a b c d e."))
    assert "not_shorter" in p.flags


def test_add_context_wrapper_is_stripped():
    p = enforce_bounds(RevisionProposal(RevisionKind.ADD_CONTEXT, "GAO", "GAO (a federal audit agency)"))
    assert p.replacement == "a federal audit agency"


def test_expert_unknown_kind_reprompts_then_fails():
    summary = "Patients had hypertension."
    bad = '{"revisions":[{"kind":"Delete","original":"hypertension"}]}'
    rt = runtime([bad, bad])
    with pytest.raises(SchemaViolationError):
        propose_revisions(ExpertRole.BIOMEDICAL, summary, _checklist(summary), rt)
    assert rt.gateway.ledger.total_calls == 2


def test_expert_needs_checklist():
    from plainsum.checklist import Checklist

    with pytest.raises(ValueError):
        propose_revisions(ExpertRole.POLICY, "x.", Checklist(), runtime("{}"))


def test_split_sentence_shortens():
    s = "Agencies reported estimates that were incomplete for several large programs, and the office found gaps in oversight."
    out = split_sentence(s)
    assert out is not None
    parts = out.split(". ")
    assert len(parts) == 2
    assert all(len(p.split()) < len(s.split()) for p in parts)
    assert split_sentence("Too short.") is None


# --- prompts and catalog ---------------------------------------------------------


def test_prompt_builders_are_pure():
    cat = default_catalog()
    p = persona()
    assert planner_prompt(cat, "abc") == planner_prompt(cat, "abc")
    assert reader_prompt(cat, p, "Sum.") == reader_prompt(cat, p, "Sum.")
    cl = _checklist("Patients had hypertension.")
    a = revise_prompt(cat, ExpertRole.BIOMEDICAL, "Patients had hypertension.", cl, "src", ())
    b = revise_prompt(cat, ExpertRole.BIOMEDICAL, "Patients had hypertension.", cl, "src", ())
    assert a == b
    assert '"hypertension"' in checklist_block(cl)


def test_reader_prompt_shows_summary_only():
    system, user = reader_prompt(default_catalog(), persona(), "THE SUMMARY")
    assert "THE SUMMARY" in user


def test_render_is_strict():
    cat = default_catalog()
    with pytest.raises(KeyError):
        cat.render("reprompt")
    assert "boom" in cat.render("reprompt", error="boom")


def test_catalog_hash_is_stable_and_tracks_few_shot():
    cat = PromptCatalog.load()
    assert cat.hash == default_catalog().hash
    assert len(cat.hash) == 64
    assert cat.with_few_shot({Genre.POLICY_REPORT: ["Example."]}).hash != cat.hash


def test_catalog_hash_tracks_template_edits(tmp_path):
    import shutil
    from importlib import resources

    src = resources.files("plainsum") / "prompts"
    dst = tmp_path / "prompts"
    dst.mkdir()
    for entry in src.iterdir():
        (dst / entry.name).write_bytes(entry.read_bytes())
    before = PromptCatalog.load(dst).hash
    path = dst / "reprompt.txt"
    path.write_text(path.read_text() + " ", encoding="utf-8")
    assert PromptCatalog.load(dst).hash != before
    shutil.rmtree(dst)


def test_persona_registry():
    reg = default_catalog().registry()
    assert [p.key for p in reg.core] == ["elementary", "non_native", "attention_deficit"]
    assert reg.get("ELE").key == "elementary"
    assert [p.key for p in reg.resolve(["att", "elementary"])] == ["attention_deficit", "elementary"]
    with pytest.raises(UnknownPersonaError):
        reg.get("pirate")
    with pytest.raises(ValueError):
        reg.resolve(["ele", "elementary"])
    with pytest.raises(ValueError):
        reg.resolve([])


def test_registering_a_new_persona_needs_no_code():
    reg = PersonaRegistry(default_catalog().registry().core)
    reg.register(ReaderPersona("retiree", "Retiree", "Reads slowly.", "Flag long words.", "ret", False))
    assert reg.get("ret").name == "Retiree"
    with pytest.raises(ValueError):
        reg.register(ReaderPersona("retiree", "Other", "p", "r", "r2", False))


def test_mock_responder_drives_every_role():
    rt = runtime(MockResponder())
    src = "The GAO reviewed federal agencies. It found gaps."
    genre, expert = classify_genre(src, rt)
    assert genre is Genre.POLICY_REPORT
    draft = draft_initial_summary(src, genre, expert, rt)
    assert draft == src
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        fb = collect_feedback(persona(), draft, rt)
    assert any(i.excerpt == "GAO" for i in fb.missing_contexts)
