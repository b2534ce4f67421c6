"""Sweeps over reader combinations, checklist size and round count.

Each cell is an independent run in its own sub-directory with its own
manifest.  A combined table compares the cells at their final round.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

from .agents import default_catalog
from .corpus import DatasetRecord
from .evaluation import METRICS, EvalReport, evaluate_run, format_cell
from .pipeline import RunConfig, RunManifest, build_backend, dump_json, error_class, run_corpus

logger = logging.getLogger(__name__)

AXES = ("personas", "k", "rounds")
DEFAULT_K_VALUES = (1, 2, 3, 6, 9)
DEFAULT_ROUND_VALUES = (0, 1, 2, 3)


@dataclass(frozen=True)
class SweepCell:
    label: str
    slug: str
    cfg: RunConfig


def persona_cells(cfg: RunConfig) -> list[SweepCell]:
    """All persona subsets: the full set, then without one, then without two, ..."""
    registry = default_catalog().registry()
    personas = registry.resolve(cfg.personas)
    cells = []
    for dropped_n in range(len(personas)):
        for dropped in itertools.combinations(personas, dropped_n):
            kept = tuple(p.key for p in personas if p not in dropped)
            short = [p.alias or p.key for p in dropped]
            label = "All" if not dropped else "w/o " + ",".join(short)
            slug = "all" if not dropped else "wo_" + "_".join(short)
            cells.append(SweepCell(label, slug, replace(cfg, personas=kept)))
    return cells


def sweep_cells(cfg: RunConfig, axis: str, values: Sequence[int] | None = None) -> list[SweepCell]:
    if axis == "personas":
        return persona_cells(cfg)
    if axis == "k":
        return [SweepCell(f"K = {k}", f"k{k}", replace(cfg, checklist_k=k)) for k in (values or DEFAULT_K_VALUES)]
    if axis == "rounds":
        return [SweepCell(f"N = {n}", f"rounds{n}", replace(cfg, rounds=n)) for n in (values or DEFAULT_ROUND_VALUES)]
    raise ValueError(f"axis must be one of {AXES}")


@dataclass
class CellResult:
    cell: SweepCell
    manifest: RunManifest | None = None
    report: EvalReport | None = None
    error: str | None = None
    error_class: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None and self.manifest is not None and self.manifest.failed == 0


def run_sweep(records: Sequence[DatasetRecord], cfg: RunConfig, axis: str,
              values: Sequence[int] | None = None) -> list[CellResult]:
    base = Path(cfg.output_dir)
    results = []
    for cell in sweep_cells(cfg, axis, values):
        cell_cfg = replace(cell.cfg, output_dir=str(base / cell.slug))
        result = CellResult(cell)
        try:
            cell_cfg.validate()
            manifest = run_corpus(records, cell_cfg, backend=build_backend(cell_cfg))
            result.manifest = manifest
            result.report = evaluate_run(cell_cfg.output_dir, records)
            if manifest.failed:
                classes = {d["error"]["class"] for d in manifest.documents if d["error"]}
                result.error = f"{manifest.failed} document(s) failed"
                result.error_class = "backend_unreachable" if classes == {"backend_unreachable"} and not manifest.succeeded else "partial"
        except Exception as exc:  # a failed cell must not stop the sweep
            logger.error("sweep cell %s failed: %s", cell.slug, exc)
            result.error = f"{type(exc).__name__}: {exc}"
            result.error_class = error_class(exc)
        results.append(result)
    write_sweep_outputs(base, axis, results)
    return results


def _final_means(report: EvalReport, dataset: str) -> dict[str, float | None]:
    last = report.rounds(dataset)[-1]
    return report.stats[dataset][last].means


def sweep_table(results: Sequence[CellResult], fmt: str = "markdown") -> str:
    datasets = sorted({ds for r in results if r.report for ds in r.report.datasets()})
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["setting", "dataset", *METRICS])
        for r in results:
            for ds in datasets:
                ok = r.report is not None and ds in r.report.stats
                means = _final_means(r.report, ds) if ok else {}
                writer.writerow([r.cell.label, ds, *(format_cell(means.get(m)) for m in METRICS)])
        return buf.getvalue()
    blocks = []
    for ds in datasets:
        rows = [f"### {ds}", "", "| Setting | " + " | ".join(METRICS) + " |", "|---|" + "---:|" * len(METRICS)]
        for r in results:
            if r.report and ds in r.report.stats:
                means = _final_means(r.report, ds)
                rows.append(f"| {r.cell.label} | " + " | ".join(format_cell(means[m]) for m in METRICS) + " |")
            else:
                rows.append(f"| {r.cell.label} | " + " | ".join("failed" for _ in METRICS) + " |")
        blocks.append("\n".join(rows))
    return "\n\n".join(blocks) + "\n"


def write_sweep_outputs(base: Path, axis: str, results: Sequence[CellResult]) -> None:
    base.mkdir(parents=True, exist_ok=True)
    summary = {
        "axis": axis,
        "cells": [
            {
                "label": r.cell.label,
                "slug": r.cell.slug,
                "manifest": str(r.manifest.path.relative_to(base)) if r.manifest else None,
                "manifest_hash": r.manifest.manifest_hash if r.manifest else None,
                "error": r.error,
            }
            for r in results
        ],
    }
    (base / "ablation.json").write_text(dump_json(summary), encoding="utf-8")
    if any(r.report and r.report.stats for r in results):
        (base / "ablation.csv").write_text(sweep_table(results, "csv"), encoding="utf-8")
        (base / "ablation.md").write_text(sweep_table(results, "markdown"), encoding="utf-8")


def load_sweep_summary(base: str | Path) -> dict:
    return json.loads((Path(base) / "ablation.json").read_text(encoding="utf-8"))
