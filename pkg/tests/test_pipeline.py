from __future__ import annotations

import json
from pathlib import Path

import pytest

from plainsum.agents.mock import MockResponder
from plainsum.corpus import DatasetRecord, load_dataset
from plainsum.llm import ReplayBackend, ScriptedBackend
from plainsum.pipeline import (
    BackendUnavailableError,
    ConfigError,
    RunConfig,
    artifact_name,
    build_backend,
    load_manifest,
    read_artifact,
    run_corpus,
    run_document,
    verify_manifest_hash,
)

FIXTURES = Path(__file__).parent / "fixtures"

DOC = DatasetRecord(
    "doc-1",
    "The Government Accountability Office reviewed federal agencies that manage improper payments, "
    "and it found that several large programs reported estimates that were incomplete and difficult "
    "to verify across multiple years of data. GAO recommends better tracking.",
    "Agencies do not track payment errors well.",
    "test",
)


def cfg(tmp_path, **kw) -> RunConfig:
    return RunConfig(output_dir=str(tmp_path / "out"), **kw)


def test_zero_rounds_gives_initial_only(tmp_path):
    arts = run_document(DOC, cfg(tmp_path, rounds=0))
    assert len(arts) == 1 and arts[0].round_index == 0
    roles = [r.agent_role for r in arts[0].ledger_slice]
    assert roles == ["planner", "drafter"]


@pytest.mark.parametrize("mode, per_round", [("deterministic", 4), ("llm", 5)])
def test_call_accounting(tmp_path, mode, per_round):
    arts = run_document(DOC, cfg(tmp_path, rounds=2, editor_mode=mode))
    assert len(arts) == 3
    assert [len(a.ledger_slice) for a in arts] == [2, per_round, per_round]
    assert [r.agent_role for r in arts[1].ledger_slice][:4] == [
        "reader:elementary", "reader:non_native", "reader:attention_deficit", "expert"
    ]


def test_rounds_chain_summaries(tmp_path):
    arts = run_document(DOC, cfg(tmp_path, rounds=2))
    for prev, cur in zip(arts, arts[1:]):
        assert all(f.persona for f in cur.feedbacks)
        # readers in round r saw the summary produced by round r-1
        for fb in cur.feedbacks:
            for item in fb.unknown_terms:
                assert item.anchored == (item.excerpt in prev.summary or " ".join(item.excerpt.split()) in " ".join(prev.summary.split()))
    assert arts[0].summary != arts[2].summary


def test_artifacts_round_trip(tmp_path):
    c = cfg(tmp_path, rounds=2)
    arts = run_document(DOC, c)
    for a in arts:
        path = Path(c.output_dir) / artifact_name(DOC.id, a.round_index)
        assert read_artifact(path) == a
        assert path.read_text(encoding="utf-8").endswith("\n")


def test_checklist_sizes_respect_k(tmp_path):
    arts = run_document(DOC, cfg(tmp_path, rounds=2, checklist_k=1))
    for a in arts[1:]:
        assert all(len(a.checklist.items(c)) <= 1 for c in ("unknown_terms", "missing_contexts", "confusing_sentences"))


def test_expert_skipped_on_empty_checklist(tmp_path):
    quiet = MockResponder({"reader:elementary": lambda req, ctx: '{"unknown_terms":[],"missing_contexts":[],"confusing_sentences":[]}'})
    c = cfg(tmp_path, rounds=1, personas=("elementary",))
    arts = run_document(DOC, c, ScriptedBackend(quiet))
    assert [r.agent_role for r in arts[1].ledger_slice] == ["reader:elementary"]
    assert arts[1].summary == arts[0].summary


def test_corpus_isolates_failures(tmp_path):
    docs = [DOC, DatasetRecord("empty", "   "), DatasetRecord("doc-2", DOC.source.replace("GAO", "The office"))]
    m = run_corpus(docs, cfg(tmp_path, rounds=1))
    assert (m.succeeded, m.failed) == (2, 1)
    bad = next(d for d in m.documents if d["id"] == "empty")
    assert bad["status"] == "failed" and bad["error"]["class"] == "input"
    assert "empty" in bad["error"]["message"]
    assert m.data["totals"]["artifacts"] == 4
    assert verify_manifest_hash(load_manifest(m.path))


def test_totals_match_ledger(tmp_path):
    docs = [DatasetRecord(f"d{i}", DOC.source) for i in range(5)]
    m = run_corpus(docs, cfg(tmp_path, rounds=2, workers=3))
    t = m.data["totals"]
    assert t["calls"] == sum(d["calls"] for d in m.documents) == 5 * (2 + 4 * 2)
    assert t["calls_per_round"] == {"0": 10, "1": 20, "2": 20}
    assert t["artifacts"] == 15


def test_manifest_hash_is_deterministic(tmp_path):
    docs = [DOC]
    a = run_corpus(docs, RunConfig(rounds=1, output_dir=str(tmp_path / "a")))
    b = run_corpus(docs, RunConfig(rounds=1, output_dir=str(tmp_path / "b")))
    assert a.manifest_hash == b.manifest_hash
    c = run_corpus(docs, RunConfig(rounds=1, checklist_k=2, output_dir=str(tmp_path / "c")))
    assert c.manifest_hash != a.manifest_hash


def test_replay_matches_committed_cassette(tmp_path):
    docs = load_dataset(FIXTURES / "cassette_docs.jsonl").records
    c = RunConfig(rounds=2, backend="replay", cassette=str(FIXTURES / "cassette.jsonl"), output_dir=str(tmp_path / "r"))
    m = run_corpus(docs, c)
    assert m.failed == 0
    arts = {d.id: read_artifact(Path(c.output_dir) / artifact_name(d.id, 0)) for d in docs}
    assert (arts["gao-fixture"].genre.value, arts["gao-fixture"].expert.value) == ("Policy Report", "Policy")
    recorded = [json.loads(line) for line in (FIXTURES / "cassette.jsonl").read_text().splitlines()]
    drafts = [r["response"]["content"] for r in recorded if r["agent_role"] == "drafter"]
    assert arts["plos-fixture"].summary == drafts[1]


def test_replay_miss_fails_document(tmp_path):
    c = RunConfig(rounds=1, backend="replay", cassette=str(FIXTURES / "cassette.jsonl"), output_dir=str(tmp_path / "r"))
    m = run_corpus([DatasetRecord("other", "Unrelated text that was never recorded.")], c)
    assert m.failed == 1 and m.documents[0]["error"]["class"] == "backend_unreachable"


def test_backend_preconditions(tmp_path, monkeypatch):
    monkeypatch.delenv("OPENAI_API_KEY", raising=False)
    with pytest.raises(BackendUnavailableError):
        build_backend(RunConfig(backend="http"))
    with pytest.raises(BackendUnavailableError):
        build_backend(RunConfig(backend="replay", cassette=str(tmp_path / "none.jsonl")))
    monkeypatch.setenv("OPENAI_API_KEY", "sk-test")
    assert build_backend(RunConfig(backend="http")).name == "http"


@pytest.mark.parametrize(
    "bad",
    [{"rounds": -1}, {"rounds": 9}, {"k": 0}, {"personas": ["pirate"]}, {"personas": "ele,elementary"},
     {"backend": "magic"}, {"editor_mode": "fancy"}, {"backend": "replay"}, {"nonsense": 1}],
)
def test_config_validation(bad):
    with pytest.raises(ConfigError):
        RunConfig.from_mapping(bad)


def test_config_aliases_and_echo():
    c = RunConfig.from_mapping({"k": 2, "seed": 7, "model_id": "qwen3-32b", "personas": "ele, att"})
    assert (c.checklist_k, c.run_seed, c.personas) == (2, 7, ("ele", "att"))
    echo = c.echo()
    assert "output_dir" not in echo and echo["temperature"] == 0.6
    assert RunConfig().echo()["temperature"] == 0.0


def test_replay_backend_is_fifo_for_duplicates(tmp_path):
    # identical documents produce identical requests; the cassette must serve them in order
    docs = [DatasetRecord("a", DOC.source), DatasetRecord("b", DOC.source)]
    cassette = tmp_path / "dup.jsonl"
    rec = RunConfig(rounds=1, record=True, cassette=str(cassette), output_dir=str(tmp_path / "rec"))
    run_corpus(docs, rec)
    rep = RunConfig(rounds=1, backend="replay", cassette=str(cassette), output_dir=str(tmp_path / "rep"))
    m = run_corpus(docs, rep, backend=ReplayBackend(cassette))
    assert m.failed == 0
