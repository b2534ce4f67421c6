"""Per-document orchestration: plan, draft, then N feedback/revise rounds.

Every round is written to disk as soon as it completes, so an aborted
document keeps all finished rounds.  Artifacts hold no wall-clock data,
which makes replayed runs byte-identical.
"""

from __future__ import annotations

import json
import logging
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .agents import (
    AgentRuntime,
    ExpertRole,
    Genre,
    ModelSettings,
    PromptCatalog,
    ReaderFeedback,
    ReaderPersona,
    RevisionProposal,
    classify_genre,
    collect_feedback,
    default_catalog,
    draft_initial_summary,
    load_few_shot,
    propose_revisions,
)
from .agents.mock import MockResponder
from .checklist import DEFAULT_K, Checklist, aggregate, unanchored_items
from .corpus import SourceDocument
from .editor import EditOutcome, apply_edits, edit_with_llm, plan_edits
from .llm import (
    DEFAULT_API_KEY_ENV,
    CallLedger,
    CallRecord,
    CassetteMissError,
    CredentialMissingError,
    ExhaustedRetriesError,
    Gateway,
    GatewayError,
    HttpBackend,
    RecordingBackend,
    ReplayBackend,
    ScriptedBackend,
)
from .llm.gateway import Backend, canonical_json, sha256_hex
from .textmetrics import ReadabilityReport, RougeScore, UndefinedMetricError, readability, rouge1

logger = logging.getLogger(__name__)

CORE_PERSONAS = ("elementary", "non_native", "attention_deficit")
BACKENDS = ("scripted", "replay", "http")
EDITOR_MODES = ("deterministic", "llm")
DEFAULT_ENDPOINT = "https://api.openai.com/v1"
MANIFEST_NAME = "run.json"


class ConfigError(ValueError):
    pass


class BackendUnavailableError(RuntimeError):
    """The selected backend cannot serve any call (no credential, no cassette)."""


@dataclass(frozen=True)
class RunConfig:
    rounds: int = 2
    checklist_k: int = DEFAULT_K
    personas: tuple[str, ...] = CORE_PERSONAS
    backend: str = "scripted"
    cassette: str | None = None
    record: bool = False
    endpoint: str = DEFAULT_ENDPOINT
    api_key_env: str = DEFAULT_API_KEY_ENV
    model: str = "gpt-4o"
    temperature: float | None = None
    top_p: float = 0.95
    top_k: int = 20
    max_tokens: int = 4096
    editor_mode: str = "deterministic"
    output_dir: str = "runs/default"
    run_seed: int = 42
    dataset: str | None = None
    field_mapping: str | None = None
    sample_n: int | None = None
    max_rounds: int = 5
    workers: int = 1
    reader_workers: int = 1
    expose_history: bool = False
    few_shot_file: str | None = None

    ALIASES = {"k": "checklist_k", "seed": "run_seed", "model_id": "model"}

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any], base: "RunConfig | None" = None) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        updates: dict[str, Any] = {}
        for key, value in data.items():
            name = cls.ALIASES.get(key.replace("-", "_"), key.replace("-", "_"))
            if name not in known:
                raise ConfigError(f"unknown config key {key!r}")
            updates[name] = value
        if "personas" in updates:
            updates["personas"] = _persona_list(updates["personas"])
        cfg = replace(base or cls(), **updates)
        cfg.validate()
        return cfg

    def validate(self, catalog: PromptCatalog | None = None) -> None:
        def need(cond: bool, msg: str) -> None:
            if not cond:
                raise ConfigError(msg)

        for name in ("rounds", "checklist_k", "max_rounds", "workers", "reader_workers", "top_k", "max_tokens"):
            value = getattr(self, name)
            need(isinstance(value, int) and not isinstance(value, bool), f"{name} must be an integer")
        need(0 <= self.rounds <= self.max_rounds, f"rounds must lie in 0..{self.max_rounds}")
        need(self.checklist_k >= 1, "checklist_k must be >= 1")
        need(self.workers >= 1 and self.reader_workers >= 1, "worker counts must be >= 1")
        need(self.backend in BACKENDS, f"backend must be one of {BACKENDS}")
        need(self.editor_mode in EDITOR_MODES, f"editor_mode must be one of {EDITOR_MODES}")
        need(self.backend != "replay" or bool(self.cassette), "replay backend needs a cassette path")
        need(not self.record or bool(self.cassette), "recording needs a cassette path")
        need(self.sample_n is None or (isinstance(self.sample_n, int) and self.sample_n >= 0), "sample_n must be >= 0")
        need(self.temperature is None or self.temperature >= 0, "temperature must be >= 0")
        need(0 < self.top_p <= 1, "top_p must lie in (0, 1]")
        need(bool(self.personas), "at least one persona is required")
        registry = (catalog or default_catalog()).registry()
        try:
            resolved = registry.resolve(self.personas)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        need(len(resolved) == len(self.personas), "duplicate personas")

    def model_settings(self) -> ModelSettings:
        return ModelSettings(
            model_id=self.model,
            temperature=self.temperature,
            top_p=self.top_p,
            top_k=self.top_k,
            max_tokens=self.max_tokens,
        )

    def to_dict(self) -> dict:
        out = asdict(self)
        out["personas"] = list(self.personas)
        return out

    def echo(self) -> dict:
        """Config as recorded in the manifest (output location excluded)."""
        out = self.to_dict()
        out.pop("output_dir")
        out["temperature"] = self.model_settings().effective_temperature
        return out


def _persona_list(value: Any) -> tuple[str, ...]:
    if isinstance(value, str):
        items = [v.strip() for v in value.split(",")]
    elif isinstance(value, Iterable):
        items = [str(v).strip() for v in value]
    else:
        raise ConfigError("personas must be a list or a comma-separated string")
    items = [i for i in items if i]
    if not items:
        raise ConfigError("at least one persona is required")
    return tuple(items)


def build_backend(cfg: RunConfig) -> Backend:
    if cfg.backend == "scripted":
        backend: Backend = ScriptedBackend(MockResponder())
    elif cfg.backend == "replay":
        path = Path(cfg.cassette or "")
        if not path.is_file():
            raise BackendUnavailableError(f"cassette not found: {path}")
        backend = ReplayBackend(path)
    else:
        if not os.environ.get(cfg.api_key_env, "").strip():
            raise BackendUnavailableError(f"environment variable {cfg.api_key_env} is not set")
        backend = HttpBackend(cfg.endpoint, api_key_env=cfg.api_key_env)
    if cfg.record:
        backend = RecordingBackend(backend, cfg.cassette)
    return backend


def build_catalog(cfg: RunConfig) -> PromptCatalog:
    catalog = default_catalog()
    if cfg.few_shot_file:
        catalog = catalog.with_few_shot(load_few_shot(cfg.few_shot_file))
    return catalog


# --- artifacts ------------------------------------------------------------------------


@dataclass(frozen=True)
class MetricSnapshot:
    readability: ReadabilityReport | None
    rouge1: RougeScore | None

    @classmethod
    def of(cls, summary: str, reference: str) -> "MetricSnapshot":
        try:
            report = readability(summary)
        except UndefinedMetricError:
            report = None
        score = rouge1(summary, reference) if reference.strip() else None
        return cls(report, score)

    def to_dict(self) -> dict:
        return {
            "readability": self.readability.to_dict() if self.readability else None,
            "rouge1": self.rouge1.to_dict() if self.rouge1 else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MetricSnapshot":
        r, g = data.get("readability"), data.get("rouge1")
        return cls(ReadabilityReport.from_dict(r) if r else None, RougeScore.from_dict(g) if g else None)


@dataclass(frozen=True)
class RoundArtifact:
    doc_id: str
    round_index: int
    genre: Genre
    expert: ExpertRole
    summary: str
    feedbacks: tuple[ReaderFeedback, ...]
    checklist: Checklist
    proposals: tuple[RevisionProposal, ...]
    outcomes: tuple[EditOutcome, ...]
    unanchored: tuple[dict, ...]
    metrics: MetricSnapshot
    ledger_slice: tuple[CallRecord, ...]
    prompt_catalog_hash: str

    def to_dict(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "round_index": self.round_index,
            "genre": self.genre.value,
            "expert": self.expert.value,
            "summary": self.summary,
            "feedbacks": [f.to_dict() for f in self.feedbacks],
            "checklist": self.checklist.to_dict(),
            "proposals": [p.to_dict() for p in self.proposals],
            "outcomes": [o.to_dict() for o in self.outcomes],
            "unanchored": list(self.unanchored),
            "metrics": self.metrics.to_dict(),
            "ledger_slice": [r.to_dict() for r in self.ledger_slice],
            "prompt_catalog_hash": self.prompt_catalog_hash,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RoundArtifact":
        return cls(
            doc_id=data["doc_id"],
            round_index=int(data["round_index"]),
            genre=Genre(data["genre"]),
            expert=ExpertRole(data["expert"]),
            summary=data["summary"],
            feedbacks=tuple(ReaderFeedback.from_dict(f) for f in data["feedbacks"]),
            checklist=Checklist.from_dict(data["checklist"]),
            proposals=tuple(RevisionProposal.from_dict(p) for p in data["proposals"]),
            outcomes=tuple(EditOutcome.from_dict(o) for o in data["outcomes"]),
            unanchored=tuple(data.get("unanchored", ())),
            metrics=MetricSnapshot.from_dict(data["metrics"]),
            ledger_slice=tuple(CallRecord.from_dict(r) for r in data["ledger_slice"]),
            prompt_catalog_hash=data["prompt_catalog_hash"],
        )


_UNSAFE = re.compile(r"[^A-Za-z0-9._-]")


def artifact_name(doc_id: str, round_index: int) -> str:
    stem = _UNSAFE.sub("_", doc_id)
    return f"{stem}.initial.json" if round_index == 0 else f"{stem}.round{round_index}.json"


def dump_json(data: Any) -> str:
    return json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def write_artifact(output_dir: Path, artifact: RoundArtifact) -> Path:
    path = output_dir / artifact_name(artifact.doc_id, artifact.round_index)
    _write_atomic(path, dump_json(artifact.to_dict()))
    return path


def read_artifact(path: str | Path) -> RoundArtifact:
    return RoundArtifact.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# --- running --------------------------------------------------------------------------


def _role_rank(personas: Sequence[str]) -> dict[str, int]:
    ranks = {"planner": 0, "drafter": 1}
    for i, p in enumerate(personas):
        ranks[f"reader:{p}"] = 2 + i
    ranks["expert"] = 2 + len(personas)
    ranks["editor"] = 3 + len(personas)
    return ranks


def _slice(ledger: CallLedger, doc_id: str, round_index: int, ranks: dict[str, int]) -> tuple[CallRecord, ...]:
    records = ledger.select(doc_id=doc_id, round_index=round_index)
    order = sorted(range(len(records)), key=lambda i: (ranks.get(records[i].agent_role, len(ranks)), i))
    return tuple(records[i] for i in order)


class EmptyDocumentError(ValueError):
    pass


@dataclass
class DocumentResult:
    doc_id: str
    artifacts: list[RoundArtifact] = field(default_factory=list)
    files: list[str] = field(default_factory=list)
    error: BaseException | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def status_dict(self, calls: int) -> dict:
        err = None
        if self.error is not None:
            err = {"class": error_class(self.error), "type": type(self.error).__name__, "message": str(self.error)}
        return {
            "id": self.doc_id,
            "status": "success" if self.ok else "failed",
            "rounds_completed": len(self.artifacts),
            "files": list(self.files),
            "calls": calls,
            "error": err,
        }


def error_class(exc: BaseException) -> str:
    if isinstance(exc, (CredentialMissingError, CassetteMissError, ExhaustedRetriesError, BackendUnavailableError)):
        return "backend_unreachable"
    if isinstance(exc, GatewayError):
        return "backend"
    if isinstance(exc, EmptyDocumentError):
        return "input"
    return "agent"


@dataclass
class Runner:
    """Shared state for one run: config, gateway, personas and catalog."""

    cfg: RunConfig
    gateway: Gateway
    catalog: PromptCatalog
    personas: tuple[ReaderPersona, ...]

    @classmethod
    def create(cls, cfg: RunConfig, backend: Backend | None = None, catalog: PromptCatalog | None = None) -> "Runner":
        catalog = catalog or build_catalog(cfg)
        cfg.validate(catalog)
        personas = catalog.registry().resolve(cfg.personas)
        return cls(cfg, Gateway(backend or build_backend(cfg)), catalog, personas)

    def _feedback_round(self, rt: AgentRuntime, summary: str, r: int) -> list[ReaderFeedback]:
        if self.cfg.reader_workers > 1 and len(self.personas) > 1:
            with ThreadPoolExecutor(max_workers=self.cfg.reader_workers) as pool:
                futures = [pool.submit(collect_feedback, p, summary, rt, round_index=r) for p in self.personas]
                return [f.result() for f in futures]
        return [collect_feedback(p, summary, rt, round_index=r) for p in self.personas]

    def run_document(self, doc: SourceDocument, output_dir: Path | None = None) -> DocumentResult:
        out_dir = Path(output_dir or self.cfg.output_dir)
        result = DocumentResult(doc.id)
        rt = AgentRuntime(self.gateway, self.cfg.model_settings(), self.catalog, doc.id)
        ranks = _role_rank([p.key for p in self.personas])
        k = self.cfg.checklist_k

        def save(artifact: RoundArtifact) -> None:
            path = write_artifact(out_dir, artifact)
            result.artifacts.append(artifact)
            result.files.append(path.name)

        try:
            if not doc.source.strip():
                raise EmptyDocumentError(f"document {doc.id!r} has an empty body")
            genre, expert = classify_genre(doc.source, rt, round_index=0)
            summary = draft_initial_summary(doc.source, genre, expert, rt, round_index=0)
            save(
                RoundArtifact(
                    doc.id, 0, genre, expert, summary, (), Checklist(k=k), (), (), (),
                    MetricSnapshot.of(summary, doc.reference),
                    _slice(self.gateway.ledger, doc.id, 0, ranks),
                    self.catalog.hash,
                )
            )
            history: list[Checklist] = []
            for r in range(1, self.cfg.rounds + 1):
                feedbacks = self._feedback_round(rt, summary, r)
                checklist = aggregate(feedbacks, summary, k)
                proposals: list[RevisionProposal] = []
                if len(checklist):
                    proposals = propose_revisions(
                        expert, summary, checklist, rt, round_index=r, source=doc.source,
                        history=history if self.cfg.expose_history else (),
                    )
                else:
                    logger.info("%s round %d: empty checklist, nothing to revise", doc.id, r)
                plan = plan_edits(summary, proposals)
                if self.cfg.editor_mode == "llm":
                    revised, outcomes = edit_with_llm(summary, plan, rt, round_index=r)
                else:
                    revised, outcomes = apply_edits(summary, plan)
                save(
                    RoundArtifact(
                        doc.id, r, genre, expert, revised, tuple(feedbacks), checklist, tuple(proposals),
                        tuple(outcomes), tuple(unanchored_items(feedbacks)),
                        MetricSnapshot.of(revised, doc.reference),
                        _slice(self.gateway.ledger, doc.id, r, ranks),
                        self.catalog.hash,
                    )
                )
                history.append(checklist)
                summary = revised
        except Exception as exc:  # isolate per-document failures
            logger.error("document %s aborted after %d round(s): %s", doc.id, len(result.artifacts), exc)
            result.error = exc
        return result


def run_document(doc: SourceDocument, cfg: RunConfig, backend: Backend | None = None) -> list[RoundArtifact]:
    """Run one document and return its artifacts; errors propagate."""
    Path(cfg.output_dir).mkdir(parents=True, exist_ok=True)
    result = Runner.create(cfg, backend).run_document(doc)
    if result.error is not None:
        raise result.error
    return result.artifacts


@dataclass
class RunManifest:
    path: Path
    data: dict

    @property
    def manifest_hash(self) -> str:
        return self.data["manifest_hash"]

    @property
    def succeeded(self) -> int:
        return self.data["totals"]["succeeded"]

    @property
    def failed(self) -> int:
        return self.data["totals"]["failed"]

    @property
    def documents(self) -> list[dict]:
        return self.data["documents"]


def _prepare_output_dir(path: Path) -> None:
    try:
        path.mkdir(parents=True, exist_ok=True)
        probe = path / ".write-test"
        probe.write_text("", encoding="utf-8")
        probe.unlink()
    except OSError as exc:
        raise ConfigError(f"output directory {path} is not writable: {exc}") from exc


def run_corpus(
    docs: Sequence[SourceDocument],
    cfg: RunConfig,
    backend: Backend | None = None,
    catalog: PromptCatalog | None = None,
) -> RunManifest:
    ids = [d.id for d in docs]
    if len(set(ids)) != len(ids):
        raise ConfigError("document ids must be unique within a run")
    out_dir = Path(cfg.output_dir)
    _prepare_output_dir(out_dir)
    runner = Runner.create(cfg, backend, catalog)

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(runner.run_document, docs))
    else:
        results = [runner.run_document(d) for d in docs]

    ledger = runner.gateway.ledger
    per_doc_calls = {d: 0 for d in ids}
    per_role: dict[str, int] = {}
    for rec in ledger.records:
        per_doc_calls[rec.doc_id] = per_doc_calls.get(rec.doc_id, 0) + 1
        role = rec.agent_role.split(":", 1)[0]
        per_role[role] = per_role.get(role, 0) + 1
    documents = [r.status_dict(per_doc_calls.get(r.doc_id, 0)) for r in results]
    manifest: dict[str, Any] = {
        "config": cfg.echo(),
        "prompt_catalog_hash": runner.catalog.hash,
        "documents": documents,
        "totals": {
            "documents": len(results),
            "succeeded": sum(r.ok for r in results),
            "failed": sum(not r.ok for r in results),
            "artifacts": sum(len(r.files) for r in results),
            "calls": ledger.total_calls,
            "calls_per_round": {str(k): v for k, v in ledger.calls_per_round().items()},
            "calls_per_role": dict(sorted(per_role.items())),
        },
    }
    manifest["manifest_hash"] = sha256_hex(canonical_json(manifest))
    path = out_dir / MANIFEST_NAME
    _write_atomic(path, dump_json(manifest))
    logger.info("run finished: %d ok, %d failed, %d calls", manifest["totals"]["succeeded"],
                manifest["totals"]["failed"], ledger.total_calls)
    return RunManifest(path, manifest)


def load_manifest(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def verify_manifest_hash(data: dict) -> bool:
    body = {k: v for k, v in data.items() if k != "manifest_hash"}
    return data.get("manifest_hash") == sha256_hex(canonical_json(body))
