"""Per-round metric evaluation over a run directory, plus table emission.

Metrics are recomputed from the summaries in the artifact files rather
than read from their snapshots.  Means are unweighted over documents.
ROUGE-1 F1 is reported on a 0-100 scale and is absent (not zero) for
documents whose reference is empty.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from statistics import fmean
from typing import Iterable, Sequence

from .corpus import DatasetRecord
from .pipeline import MANIFEST_NAME, artifact_name, read_artifact
from .textmetrics import UndefinedMetricError, readability, rouge1

logger = logging.getLogger(__name__)

METRICS = ("ROUGE-1", "FKGL", "DCRS", "CLI", "ARI")
TABLE_FORMATS = ("csv", "markdown")


def round_label(r: int) -> str:
    return "Initial" if r == 0 else f"Round {r}"


@dataclass(frozen=True)
class DocScores:
    doc_id: str
    dataset: str
    round_index: int
    fkgl: float
    dcrs: float
    cli: float
    ari: float
    rouge1_f1: float | None

    def value(self, metric: str) -> float | None:
        return {
            "ROUGE-1": self.rouge1_f1,
            "FKGL": self.fkgl,
            "DCRS": self.dcrs,
            "CLI": self.cli,
            "ARI": self.ari,
        }[metric]


@dataclass(frozen=True)
class RoundStats:
    doc_count: int
    means: dict[str, float | None]
    rouge_doc_count: int


@dataclass
class EvalReport:
    stats: dict[str, dict[int, RoundStats]] = field(default_factory=dict)
    documents: list[DocScores] = field(default_factory=list)
    missing: list[dict] = field(default_factory=list)
    config: dict | None = None

    def datasets(self) -> list[str]:
        return sorted(self.stats)

    def rounds(self, dataset: str | None = None) -> list[int]:
        if dataset is not None:
            return sorted(self.stats.get(dataset, {}))
        return sorted({r for per in self.stats.values() for r in per})

    def mean(self, dataset: str, round_index: int, metric: str) -> float | None:
        return self.stats[dataset][round_index].means[metric]

    def to_dict(self) -> dict:
        return {
            "datasets": {
                ds: {
                    str(r): {"documents": s.doc_count, "rouge_documents": s.rouge_doc_count, "means": s.means}
                    for r, s in sorted(per.items())
                }
                for ds, per in sorted(self.stats.items())
            },
            "missing": self.missing,
            "config": self.config,
        }


def score_document(
    doc_id: str, dataset: str, round_index: int, summary: str, reference: str
) -> DocScores:
    report = readability(summary)
    f1 = rouge1(summary, reference).f1 * 100 if reference.strip() else None
    return DocScores(doc_id, dataset, round_index, report.fkgl, report.dcrs, report.cli, report.ari, f1)


def aggregate_scores(scores: Iterable[DocScores]) -> dict[str, dict[int, RoundStats]]:
    grouped: dict[tuple[str, int], list[DocScores]] = {}
    for s in scores:
        grouped.setdefault((s.dataset, s.round_index), []).append(s)
    out: dict[str, dict[int, RoundStats]] = {}
    for (ds, r), group in sorted(grouped.items()):
        means: dict[str, float | None] = {}
        for metric in METRICS:
            values = [v for v in (g.value(metric) for g in group) if v is not None]
            means[metric] = fmean(values) if values else None
        rouge_n = sum(1 for g in group if g.rouge1_f1 is not None)
        out.setdefault(ds, {})[r] = RoundStats(len(group), means, rouge_n)
    return out


def _artifact_rounds(artifact_dir: Path, doc_id: str, max_rounds: int) -> list[tuple[int, Path]]:
    found = []
    for r in range(max_rounds + 1):
        path = artifact_dir / artifact_name(doc_id, r)
        if path.is_file():
            found.append((r, path))
    return found


def evaluate_run(
    artifact_dir: str | Path, records: Sequence[DatasetRecord], *, max_rounds: int = 20
) -> EvalReport:
    artifact_dir = Path(artifact_dir)
    report = EvalReport()
    manifest_path = artifact_dir / MANIFEST_NAME
    if manifest_path.is_file():
        report.config = json.loads(manifest_path.read_text(encoding="utf-8")).get("config")
    for rec in records:
        rounds = _artifact_rounds(artifact_dir, rec.id, max_rounds)
        if not rounds:
            report.missing.append({"id": rec.id, "reason": "no artifacts"})
            continue
        for r, path in rounds:
            try:
                artifact = read_artifact(path)
                report.documents.append(
                    score_document(rec.id, rec.dataset_name or "dataset", r, artifact.summary, rec.reference)
                )
            except (OSError, ValueError, KeyError) as exc:
                reason = "summary has no words" if isinstance(exc, UndefinedMetricError) else f"unreadable: {exc}"
                report.missing.append({"id": rec.id, "round": r, "reason": reason})
    report.stats = aggregate_scores(report.documents)
    for m in report.missing:
        logger.warning("excluded from evaluation: %s", m)
    return report


def export_for_scorers(artifact_dir: str | Path, records: Sequence[DatasetRecord], out_dir: str | Path,
                       *, max_rounds: int = 20) -> list[Path]:
    """Write one ``scorer_round{r}.jsonl`` per round for external metrics."""
    artifact_dir, out_dir = Path(artifact_dir), Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows: dict[int, list[str]] = {}
    for rec in records:
        for r, path in _artifact_rounds(artifact_dir, rec.id, max_rounds):
            artifact = read_artifact(path)
            line = {"id": rec.id, "round": r, "candidate": artifact.summary, "reference": rec.reference,
                    "source": rec.source}
            rows.setdefault(r, []).append(json.dumps(line, ensure_ascii=False))
    written = []
    for r, lines in sorted(rows.items()):
        path = out_dir / f"scorer_round{r}.jsonl"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        written.append(path)
    return written


def format_cell(value: float | None) -> str:
    return "" if value is None else f"{value:.2f}"


def emit_table(report: EvalReport, fmt: str = "markdown") -> str:
    """Rows are metrics and columns are rounds, one table per dataset."""
    if fmt not in TABLE_FORMATS:
        raise ValueError(f"format must be one of {TABLE_FORMATS}")
    if not report.stats:
        raise ValueError("report has no evaluated documents")
    if fmt == "csv":
        rounds = report.rounds()
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["dataset", "metric", *(round_label(r) for r in rounds)])
        for ds in report.datasets():
            per = report.stats[ds]
            for metric in METRICS:
                writer.writerow([ds, metric, *(format_cell(per[r].means[metric]) if r in per else "" for r in rounds)])
        return buf.getvalue()

    blocks = []
    for ds in report.datasets():
        rounds = report.rounds(ds)
        per = report.stats[ds]
        counts = ", ".join(f"{round_label(r)}: {per[r].doc_count}" for r in rounds)
        lines = [
            f"### {ds}",
            "",
            f"Documents per round: {counts}",
            "",
            "| Metric | " + " | ".join(round_label(r) for r in rounds) + " |",
            "|---|" + "---:|" * len(rounds),
        ]
        for metric in METRICS:
            lines.append(f"| {metric} | " + " | ".join(format_cell(per[r].means[metric]) for r in rounds) + " |")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


def parse_csv_table(text: str) -> dict[tuple[str, str, str], float | None]:
    """Inverse of the csv emitter: ``(dataset, metric, column) -> value``."""
    rows = list(csv.reader(io.StringIO(text)))
    header = rows[0]
    out = {}
    for row in rows[1:]:
        for col, cell in zip(header[2:], row[2:]):
            out[(row[0], row[1], col)] = float(cell) if cell else None
    return out
