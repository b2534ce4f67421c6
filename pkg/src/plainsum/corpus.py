"""JSON-lines dataset ingestion.

Each line is an object with ``id``, ``source`` and an optional
``reference``.  Public datasets use other field names; ``FIELD_MAPPINGS``
holds recipes for the four evaluation corpora.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping

logger = logging.getLogger(__name__)


class DatasetError(ValueError):
    """The dataset file is unreadable or contains no usable records."""


@dataclass(frozen=True)
class DatasetRecord:
    id: str
    source: str
    reference: str = ""
    dataset_name: str = ""


# The pipeline consumes the same shape.
SourceDocument = DatasetRecord


@dataclass(frozen=True)
class FieldMapping:
    source: str = "source"
    reference: str = "reference"
    id: str | None = "id"


FIELD_MAPPINGS: dict[str, FieldMapping] = {
    "default": FieldMapping(),
    "plos": FieldMapping(source="article", reference="summary", id=None),
    "govreport": FieldMapping(source="report", reference="summary", id=None),
    "billsum": FieldMapping(source="text", reference="summary", id=None),
    "bigpatent": FieldMapping(source="description", reference="abstract", id=None),
}


@dataclass(frozen=True)
class LineError:
    line: int
    message: str


@dataclass
class LoadedDataset:
    name: str
    records: list[DatasetRecord] = field(default_factory=list)
    errors: list[LineError] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[DatasetRecord]:
        return iter(self.records)

    def __getitem__(self, i: int) -> DatasetRecord:
        return self.records[i]


def _resolve_mapping(mapping: str | FieldMapping | Mapping | None) -> FieldMapping:
    if mapping is None:
        return FIELD_MAPPINGS["default"]
    if isinstance(mapping, FieldMapping):
        return mapping
    if isinstance(mapping, str):
        try:
            return FIELD_MAPPINGS[mapping.casefold()]
        except KeyError:
            raise DatasetError(f"unknown field mapping {mapping!r}; known: {sorted(FIELD_MAPPINGS)}") from None
    return FieldMapping(**mapping)


def load_dataset(
    path: str | Path,
    *,
    dataset_name: str | None = None,
    mapping: str | FieldMapping | Mapping | None = None,
) -> LoadedDataset:
    """Parse a JSON-lines file, collecting per-line errors.

    Bad lines are skipped and reported; the load fails only when the file
    cannot be read or every non-blank line is bad.  Without an id field
    (``mapping.id`` is ``None``) ids are ``<name>-<line number>``.
    """
    path = Path(path)
    fields = _resolve_mapping(mapping)
    name = dataset_name or path.stem
    try:
        text = path.read_bytes().decode("utf-8-sig")
    except (OSError, UnicodeDecodeError) as exc:
        raise DatasetError(f"cannot read {path}: {exc}") from exc

    out = LoadedDataset(name=name)
    seen: set[str] = set()
    nonblank = 0
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        nonblank += 1
        try:
            row = json.loads(line)
        except json.JSONDecodeError as exc:
            out.errors.append(LineError(lineno, f"invalid JSON: {exc.msg}"))
            continue
        if not isinstance(row, dict):
            out.errors.append(LineError(lineno, "line is not a JSON object"))
            continue
        if fields.id is None:
            rec_id = f"{name}-{lineno}"
        else:
            raw_id = row.get(fields.id)
            if isinstance(raw_id, bool) or not isinstance(raw_id, (str, int)) or str(raw_id).strip() == "":
                out.errors.append(LineError(lineno, f"missing or invalid {fields.id!r}"))
                continue
            rec_id = str(raw_id).strip()
        source = row.get(fields.source)
        # An empty string is kept: the pipeline reports it as a failed document.
        if not isinstance(source, str):
            out.errors.append(LineError(lineno, f"missing or non-string {fields.source!r}"))
            continue
        reference = row.get(fields.reference, "")
        if reference is None:
            reference = ""
        if not isinstance(reference, str):
            out.errors.append(LineError(lineno, f"{fields.reference!r} must be a string"))
            continue
        if rec_id in seen:
            out.errors.append(LineError(lineno, f"duplicate id {rec_id!r}"))
            continue
        seen.add(rec_id)
        out.records.append(DatasetRecord(rec_id, source, reference, str(row.get("dataset") or name)))

    for err in out.errors:
        logger.warning("%s:%d: %s", path, err.line, err.message)
    if nonblank and not out.records:
        raise DatasetError(f"{path}: all {nonblank} lines were rejected")
    return out
