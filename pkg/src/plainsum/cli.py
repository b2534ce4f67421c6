"""Command-line entry point: run, record, eval, metrics and ablate.

Exit codes: 0 success, 1 unexpected error, 2 invalid config or
unreadable input, 3 backend unreachable, 4 partial failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Sequence

import yaml

from .ablation import AXES, run_sweep
from .corpus import DatasetError, LoadedDataset, load_dataset
from .evaluation import emit_table, evaluate_run, export_for_scorers
from .llm import DEFAULT_API_KEY_ENV
from .pipeline import BackendUnavailableError, ConfigError, RunConfig, run_corpus
from .rng import sample
from .textmetrics import UndefinedMetricError, readability

logger = logging.getLogger("plainsum")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_BACKEND = 3
EXIT_PARTIAL = 4

# argparse dest -> RunConfig field
_FLAG_FIELDS = {
    "dataset": "dataset",
    "field_mapping": "field_mapping",
    "sample_n": "sample_n",
    "seed": "run_seed",
    "rounds": "rounds",
    "k": "checklist_k",
    "personas": "personas",
    "backend": "backend",
    "cassette": "cassette",
    "editor_mode": "editor_mode",
    "output_dir": "output_dir",
    "model": "model",
    "endpoint": "endpoint",
    "api_key_env": "api_key_env",
    "temperature": "temperature",
    "max_tokens": "max_tokens",
    "workers": "workers",
    "few_shot_file": "few_shot_file",
}


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML or JSON file with RunConfig keys")
    p.add_argument("--dataset", help="JSON-lines dataset with id/source/reference")
    p.add_argument("--field-mapping", help="field recipe: default, plos, govreport, billsum, bigpatent")
    p.add_argument("--sample-n", type=int, help="sample this many records (seeded)")
    p.add_argument("--seed", type=int, help="sampling seed (default 42)")
    p.add_argument("--rounds", type=int, help="refinement rounds (default 2)")
    p.add_argument("--k", type=int, help="checklist items per category (default 3)")
    p.add_argument("--personas", help="comma-separated persona keys or aliases")
    p.add_argument("--backend", choices=("scripted", "replay", "http"))
    p.add_argument("--cassette", help="cassette file for replay or recording")
    p.add_argument("--editor-mode", choices=("deterministic", "llm"))
    p.add_argument("--output-dir")
    p.add_argument("--model")
    p.add_argument("--endpoint", help="OpenAI-compatible base URL")
    p.add_argument("--api-key-env", help=f"environment variable holding the API key (default {DEFAULT_API_KEY_ENV})")
    p.add_argument("--temperature", type=float)
    p.add_argument("--max-tokens", type=int)
    p.add_argument("--workers", type=int, help="documents processed in parallel")
    p.add_argument("--few-shot-file", help="JSON of genre -> example summaries")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plainsum", description="Reader-feedback plain-language summarization")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="summarize a corpus and write round artifacts")
    _add_run_flags(run)
    run.add_argument("--format", choices=("text", "json"), default="text")

    rec = sub.add_parser("record", help="run while recording every exchange to a cassette")
    _add_run_flags(rec)
    rec.add_argument("--format", choices=("text", "json"), default="text")

    ev = sub.add_parser("eval", help="score the artifacts of a run")
    ev.add_argument("--config")
    ev.add_argument("--dataset")
    ev.add_argument("--field-mapping")
    ev.add_argument("--output-dir", help="run directory holding the artifacts")
    ev.add_argument("--format", choices=("markdown", "csv", "json"), default="markdown")
    ev.add_argument("--export", help="also write per-round JSON-lines for external scorers here")

    met = sub.add_parser("metrics", help="readability scores for text files")
    met.add_argument("input", help="plain text file, or JSON-lines with a text/summary/source field")
    met.add_argument("--format", choices=("json", "csv", "table"), default="table")

    abl = sub.add_parser("ablate", help="sweep personas, k or rounds")
    _add_run_flags(abl)
    abl.add_argument("--axis", choices=AXES, required=True)
    abl.add_argument("--values", help="comma-separated integers for the k or rounds axis")
    abl.add_argument("--format", choices=("markdown", "csv"), default="markdown")
    return parser


def load_config_file(path: str | None) -> dict[str, Any]:
    if not path:
        return {}
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping")
    return data


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Built-in defaults, overridden by the config file, overridden by flags."""
    cfg = RunConfig.from_mapping(load_config_file(getattr(args, "config", None)))
    flags = {}
    for dest, name in _FLAG_FIELDS.items():
        value = getattr(args, dest, None)
        if value is not None:
            flags[name] = value
    return RunConfig.from_mapping(flags, base=cfg) if flags else cfg


def _load_records(cfg: RunConfig) -> LoadedDataset:
    if not cfg.dataset:
        raise ConfigError("no dataset given (use --dataset or the 'dataset' config key)")
    data = load_dataset(cfg.dataset, mapping=cfg.field_mapping)
    for err in data.errors:
        print(f"warning: {cfg.dataset}:{err.line}: {err.message}", file=sys.stderr)
    if cfg.sample_n is not None:
        if cfg.sample_n > len(data.records):
            raise ConfigError(f"sample_n={cfg.sample_n} exceeds the {len(data.records)} usable records")
        data = LoadedDataset(data.name, sample(data.records, cfg.sample_n, cfg.run_seed), data.errors)
    return data


def _run_exit_code(manifest) -> int:
    if manifest.failed == 0:
        return EXIT_OK
    classes = {d["error"]["class"] for d in manifest.documents if d["error"]}
    if manifest.succeeded == 0 and classes == {"backend_unreachable"}:
        return EXIT_BACKEND
    return EXIT_PARTIAL


def cmd_run(args: argparse.Namespace, *, record: bool = False) -> int:
    cfg = resolve_config(args)
    if record:
        if not cfg.cassette:
            raise ConfigError("record needs --cassette")
        if getattr(args, "backend", None) is None and "backend" not in load_config_file(args.config):
            cfg = replace(cfg, backend="http")
        cfg = replace(cfg, record=True)
        cfg.validate()
    data = _load_records(cfg)
    manifest = run_corpus(data.records, cfg)
    totals = manifest.data["totals"]
    if args.format == "json":
        print(json.dumps({"manifest": str(manifest.path), **totals}, sort_keys=True))
    else:
        print(f"manifest: {manifest.path}")
        print(
            f"documents: {totals['documents']}  succeeded: {totals['succeeded']}  failed: {totals['failed']}  "
            f"artifacts: {totals['artifacts']}  calls: {totals['calls']}"
        )
        for d in manifest.documents:
            if d["error"]:
                print(f"failed: {d['id']}: {d['error']['message']}")
    return _run_exit_code(manifest)


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    run_dir = Path(cfg.output_dir)
    if not run_dir.is_dir():
        raise ConfigError(f"run directory {run_dir} does not exist")
    data = _load_records(replace(cfg, sample_n=None))
    report = evaluate_run(run_dir, data.records)
    for m in report.missing:
        print(f"warning: excluded {m}", file=sys.stderr)
    if not report.stats:
        print("no artifacts could be evaluated", file=sys.stderr)
        return EXIT_PARTIAL
    if args.format == "json":
        print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    else:
        sys.stdout.write(emit_table(report, args.format))
    if args.export:
        for path in export_for_scorers(run_dir, data.records, args.export):
            print(f"exported: {path}", file=sys.stderr)
    return EXIT_OK


def _read_texts(path: Path) -> list[tuple[str, str]]:
    try:
        raw = path.read_text(encoding="utf-8-sig")
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if path.suffix.lower() not in (".jsonl", ".ndjson"):
        return [(path.stem, raw)]
    texts = []
    for lineno, line in enumerate(raw.splitlines(), 1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{lineno}: invalid JSON: {exc.msg}") from exc
        if isinstance(row, str):
            texts.append((str(lineno), row))
            continue
        if not isinstance(row, dict):
            raise ConfigError(f"{path}:{lineno}: expected an object or a string")
        text = next((row[k] for k in ("text", "summary", "source") if isinstance(row.get(k), str)), None)
        if text is None:
            raise ConfigError(f"{path}:{lineno}: no text, summary or source field")
        texts.append((str(row.get("id", lineno)), text))
    return texts


def cmd_metrics(args: argparse.Namespace) -> int:
    rows = []
    for text_id, text in _read_texts(Path(args.input)):
        try:
            report = readability(text)
        except UndefinedMetricError as exc:
            raise ConfigError(f"{text_id}: {exc}") from exc
        rows.append({"id": text_id, **report.to_dict()})
    columns = ["id", "fkgl", "dcrs", "cli", "ari", "word_count", "sentence_count"]
    if args.format == "json":
        print(json.dumps(rows, indent=2))
    elif args.format == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
        writer.writeheader()
        writer.writerows(rows)
        sys.stdout.write(buf.getvalue())
    else:
        print("  ".join(f"{c:>14}" for c in columns))
        for r in rows:
            cells = [r["id"]] + [f"{r[c]:.2f}" for c in ("fkgl", "dcrs", "cli", "ari")]
            cells += [str(r["word_count"]), str(r["sentence_count"])]
            print("  ".join(f"{c:>14}" for c in cells))
    return EXIT_OK


def cmd_ablate(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    values = None
    if args.values:
        if args.axis == "personas":
            raise ConfigError("--values applies to the k and rounds axes only")
        try:
            values = [int(v) for v in args.values.split(",") if v.strip()]
        except ValueError as exc:
            raise ConfigError(f"--values must be integers: {exc}") from exc
    data = _load_records(cfg)
    results = run_sweep(data.records, cfg, args.axis, values)
    for r in results:
        status = "ok" if r.ok else f"FAILED ({r.error})"
        where = r.manifest.path if r.manifest else "-"
        print(f"{r.cell.label}: {status}  manifest: {where}")
    if any(r.report and r.report.stats for r in results):
        print(f"table: {Path(cfg.output_dir) / ('ablation.csv' if args.format == 'csv' else 'ablation.md')}")
    if all(r.ok for r in results):
        return EXIT_OK
    if all(r.error_class == "backend_unreachable" for r in results):
        return EXIT_BACKEND
    return EXIT_PARTIAL


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "record":
            return cmd_run(args, record=True)
        if args.command == "eval":
            return cmd_eval(args)
        if args.command == "metrics":
            return cmd_metrics(args)
        if args.command == "ablate":
            return cmd_ablate(args)
    except (ConfigError, DatasetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BackendUnavailableError as exc:
        print(f"error: backend unreachable: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except Exception as exc:
        logger.exception("unexpected failure")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    parser.error(f"unknown command {args.command!r}")
    return EXIT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
