from __future__ import annotations

import pytest
from hypothesis import given, settings

from plainsum.agents import AgentRuntime, RevisionKind, RevisionProposal
from plainsum.editor import (
    EditOutcome,
    EditStatus,
    StalePlanError,
    apply_edits,
    edit_with_llm,
    find_anchor,
    plan_edits,
    render,
)
from plainsum.llm import Gateway, ScriptedBackend
from plainsum.spans import normalize_ws
from plainsum.textmetrics import tokenize
from tests.strategies import proposal_sets

RT = RevisionKind.REPLACE_TERM
AC = RevisionKind.ADD_CONTEXT
RS = RevisionKind.REWRITE_SENTENCE
II = RevisionKind.INSUFFICIENT_INFORMATION


def P(kind, original, replacement="") -> RevisionProposal:
    return RevisionProposal(kind, original, replacement)


def run(summary, proposals):
    return apply_edits(summary, plan_edits(summary, proposals))


def test_empty_plan_is_identity():
    text, outcomes = run("Nothing changes here.", [])
    assert text == "Nothing changes here." and outcomes == []


def test_single_replace_term():
    text, (o,) = run("We utilize X.", [P(RT, "utilize", "use")])
    assert text == "We use X."
    assert o.status is EditStatus.APPLIED and (o.pre_offset, o.pre_end) == (3, 10)


def test_disjoint_spans_planned_in_position_order():
    summary = "Alpha one. Beta two."
    plan = plan_edits(summary, [P(RT, "Beta", "B"), P(RT, "Alpha", "A")])
    assert [e.proposal.original for e in plan.edits] == ["Alpha", "Beta"]
    assert apply_edits(summary, plan)[0] == "A one. B two."


def test_longer_span_wins_overlap():
    summary = "Patients had high blood pressure for years. They recovered."
    sentence = "Patients had high blood pressure for years."
    proposals = [P(RT, "blood pressure", "hypertension"), P(RS, sentence, "Patients were ill. It lasted years.")]
    plan = plan_edits(summary, proposals)
    assert [e.index for e in plan.edits] == [1]
    text, outcomes = apply_edits(summary, plan)
    assert outcomes[0].status is EditStatus.SKIPPED_OVERLAP
    assert outcomes[1].status is EditStatus.APPLIED
    assert text == "Patients were ill. It lasted years. They recovered."


def test_missing_anchor_is_skipped():
    text, (o,) = run("Costs rose.", [P(RT, "deficit", "shortfall")])
    assert text == "Costs rose." and o.status is EditStatus.SKIPPED_ANCHOR_MISSING


def test_insufficient_information_is_skipped():
    text, (o,) = run("Costs rose.", [P(II, "Costs")])
    assert text == "Costs rose." and o.status is EditStatus.SKIPPED_INSUFFICIENT_INFO


def test_stale_plan_rejected():
    plan = plan_edits("We utilize X.", [P(RT, "utilize", "use")])
    with pytest.raises(StalePlanError):
        apply_edits("We utilize Y.", plan)


def test_rewrite_splits_long_sentence():
    original = " ".join(f"w{i}" for i in range(23)) + " end."
    assert tokenize(original).word_count == 24
    first = " ".join(f"w{i}" for i in range(10)) + " stop."
    second = "Then " + " ".join(f"v{i}" for i in range(10)) + "."
    summary = f"Intro here. {original} Outro here."
    text, (o,) = run(summary, [P(RS, original, f"{first} {second}")])
    assert o.status is EditStatus.APPLIED
    before, after = tokenize(summary), tokenize(text)
    assert after.sentence_count == before.sentence_count + 1
    counts = [s.word_count for s in after.sentences[1:3]]
    assert counts == [11, 11]
    assert all(c <= 24 for c in counts)


def test_add_context_renders_parenthetical_before_period():
    p = P(AC, "GAO.", "a federal audit agency")
    assert render(p, "GAO.") == "GAO (a federal audit agency)."
    text, _ = run("The study came from GAO.", [P(AC, "GAO", "a federal audit agency.")])
    assert text == "The study came from GAO (a federal audit agency)."


def test_replacement_matches_initial_capital():
    text, _ = run("Utilize tools.", [P(RT, "Utilize", "use")])
    assert text == "Use tools."


def test_anchor_respects_word_boundaries():
    assert find_anchor("because we use it", "use") == (11, 14)
    text, _ = run("It failed because we use it.", [P(RT, "use", "apply")])
    assert text == "It failed because we apply it."


def test_anchor_tolerates_whitespace_differences():
    text, (o,) = run("Total  budget\nauthority rose.", [P(RT, "budget authority", "money")])
    assert text == "Total  money rose." and o.status is EditStatus.APPLIED


def test_first_occurrence_only():
    text, _ = run("Costs rose and costs fell. Costs", [P(RT, "costs", "prices")])
    assert text == "Costs rose and prices fell. Costs"


def test_over_length_proposals_are_truncated_in_plan():
    summary = "We utilize X and GAO data."
    long_def = " ".join(["word"] * 9)
    long_ctx = " ".join(["ctx"] * 20)
    text, outcomes = run(summary, [P(RT, "utilize", long_def), P(AC, "GAO", long_ctx)])
    assert outcomes[0].rendered == " ".join(["word"] * 5)
    assert outcomes[1].rendered == "GAO (" + " ".join(["ctx"] * 15) + ")"
    assert all("truncated" in o.proposal.flags for o in outcomes)


def test_outcome_round_trip():
    _, (o,) = run("We utilize X.", [P(RT, "utilize", "use")])
    assert EditOutcome.from_dict(o.to_dict()) == o


# --- llm editor mode ------------------------------------------------------------


def rt_with(script) -> AgentRuntime:
    return AgentRuntime(Gateway(ScriptedBackend(script)), doc_id="d")


def test_llm_editor_no_call_when_plan_empty():
    rt = rt_with("unused")
    text, outcomes = edit_with_llm("Costs rose.", plan_edits("Costs rose.", []), rt, round_index=1)
    assert text == "Costs rose." and rt.gateway.ledger.total_calls == 0


def test_llm_editor_faithful_model():
    summary = "We utilize X. GAO wrote it."
    plan = plan_edits(summary, [P(RT, "utilize", "use"), P(RT, "wrote", "made")])
    rt = rt_with("We use X. GAO made it.")
    text, outcomes = edit_with_llm(summary, plan, rt, round_index=1)
    assert text == "We use X. GAO made it."
    assert [o.status for o in outcomes] == [EditStatus.APPLIED, EditStatus.APPLIED]
    assert rt.gateway.ledger.records[0].agent_role == "editor"


def test_llm_editor_dropped_edit_is_reported():
    summary = "We utilize X. GAO wrote it."
    plan = plan_edits(summary, [P(RT, "utilize", "use"), P(RT, "wrote", "made")])
    text, outcomes = edit_with_llm(summary, plan, rt_with("We use X. GAO wrote it."), round_index=1)
    assert text == "We use X. GAO wrote it."
    assert [o.status for o in outcomes] == [EditStatus.APPLIED, EditStatus.SKIPPED_BY_EDITOR]


# --- properties -------------------------------------------------------------------


def _check_safety(summary: str, proposals: list[RevisionProposal]) -> None:
    plan = plan_edits(summary, proposals)
    text, outcomes = apply_edits(summary, plan)
    assert len(outcomes) == len(proposals)
    applied = sorted((o for o in outcomes if o.status is EditStatus.APPLIED), key=lambda o: o.pre_offset)
    # anchor soundness
    for o in applied:
        assert normalize_ws(summary[o.pre_offset:o.pre_end]) == normalize_ws(o.proposal.original)
        assert text[o.post_offset:o.post_offset + len(o.rendered)] == o.rendered
    # pre-image disjointness, brute force over all pairs
    for i, a in enumerate(applied):
        for b in applied[i + 1:]:
            assert a.pre_end <= b.pre_offset or b.pre_end <= a.pre_offset
    # every overlap exclusion really intersects an applied span at least as long
    for o in outcomes:
        if o.status is EditStatus.SKIPPED_OVERLAP:
            b, e = find_anchor(summary, o.proposal.original)
            assert any(a.pre_offset < e and b < a.pre_end and a.pre_end - a.pre_offset >= e - b for a in applied)
    # conservation: text outside the edited spans survives character for character
    pieces, cursor = [], 0
    for o in applied:
        pieces += [summary[cursor:o.pre_offset], o.rendered]
        cursor = o.pre_end
    pieces.append(summary[cursor:])
    assert text == "".join(pieces)
    # length bounds
    for o in applied:
        if o.proposal.kind is RevisionKind.REPLACE_TERM:
            assert len(o.rendered.split()) <= 5
        if o.proposal.kind is RevisionKind.ADD_CONTEXT:
            assert len(o.proposal.replacement.split()) <= 15


@settings(max_examples=300, deadline=None)
@given(proposal_sets())
def test_editor_safety(case):
    _check_safety(*case)
