"""Labeled sentence datasets: ingestion, distribution stats, binary views."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .aspects import ALL_ASPECTS, Aspect, parse_aspect
from .errors import DatasetFormatError, DatasetLoadError
from .preprocess import CleanSentence

DATASET_FORMATS = ("opiner-csv", "jsonl")


@dataclass(frozen=True)
class LabeledSentence:
    """One clean sentence with its gold aspect set (never empty)."""

    sentence: CleanSentence
    aspects: frozenset[Aspect]
    origin: str = ""

    def __post_init__(self) -> None:
        if not self.aspects:
            raise ValueError("LabeledSentence.aspects must be non-empty")


@dataclass(frozen=True)
class Dataset:
    items: tuple[LabeledSentence, ...]
    name: str = ""

    def __len__(self) -> int:
        return len(self.items)


@dataclass(frozen=True)
class AspectDistribution:
    """Per-aspect sample counts and rates over one dataset."""

    counts: Mapping[Aspect, int]
    rates: Mapping[Aspect, float]
    total: int

    def rows(self) -> list[tuple[str, int, int]]:
        """(aspect, count, whole percent) rows in canonical aspect order."""
        return [
            (a.value, self.counts[a], round_half_up(100.0 * self.rates[a]))
            for a in ALL_ASPECTS
        ]


@dataclass(frozen=True)
class BinaryView:
    """One-vs-rest partition of a dataset for a single target aspect."""

    target: Aspect
    positives: tuple[LabeledSentence, ...]
    negatives: tuple[LabeledSentence, ...]


def round_half_up(x: float, digits: int = 0) -> float | int:
    """Round with ties away from zero, as in the published tables."""
    scale = 10**digits
    value = math.floor(abs(x) * scale + 0.5) / scale * (1 if x >= 0 else -1)
    return int(value) if digits == 0 else value


def infer_format(path: str | Path) -> str:
    suffix = Path(path).suffix.lower()
    if suffix in (".jsonl", ".ndjson"):
        return "jsonl"
    return "opiner-csv"


def load_dataset(path: str | Path, format: str | None = None) -> Dataset:
    """Load a labeled sentence dataset from disk.

    ``opiner-csv`` expects columns ``id``, ``text``, plus one 0/1 column per
    aspect; ``jsonl`` expects ``{"text": ..., "aspects": [...]}`` objects
    with an optional ``id``. Rows are kept in file order, duplicates
    included. Unknown aspect labels and rows with no aspect at all are
    format errors naming the offending row.
    """
    path = Path(path)
    fmt = format or infer_format(path)
    if fmt not in DATASET_FORMATS:
        raise DatasetFormatError(f"unknown dataset format {fmt!r}; expected one of {DATASET_FORMATS}")
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DatasetLoadError(f"cannot read dataset file {path}: {exc}") from exc
    if fmt == "jsonl":
        items = _parse_jsonl(raw, str(path))
    else:
        items = _parse_opiner_csv(raw, str(path))
    return Dataset(items=tuple(items), name=path.stem)


def _parse_opiner_csv(raw: str, source: str) -> list[LabeledSentence]:
    reader = csv.reader(io.StringIO(raw))
    try:
        header = next(reader)
    except StopIteration:
        raise DatasetFormatError(f"{source}: empty file, expected a header row") from None
    header = [h.strip() for h in header]
    if "id" not in header or "text" not in header:
        raise DatasetFormatError(f"{source}: header must contain 'id' and 'text' columns, got {header}")
    aspect_cols: list[tuple[int, Aspect]] = []
    for idx, name in enumerate(header):
        if name in ("id", "text"):
            continue
        try:
            aspect_cols.append((idx, parse_aspect(name)))
        except ValueError as exc:
            raise DatasetFormatError(f"{source}: {exc} (header column {idx})") from None
    if not aspect_cols:
        raise DatasetFormatError(f"{source}: no aspect columns in header")
    id_idx, text_idx = header.index("id"), header.index("text")

    items: list[LabeledSentence] = []
    for row_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise DatasetFormatError(f"{source}: row {row_no} has {len(row)} fields, expected {len(header)}")
        aspects = set()
        for idx, aspect in aspect_cols:
            flag = row[idx].strip()
            if flag not in ("0", "1"):
                raise DatasetFormatError(f"{source}: row {row_no} column {header[idx]!r} must be 0 or 1, got {flag!r}")
            if flag == "1":
                aspects.add(aspect)
        if not aspects:
            raise DatasetFormatError(f"{source}: row {row_no} has no aspect label")
        items.append(
            LabeledSentence(
                sentence=CleanSentence(row[text_idx]),
                aspects=frozenset(aspects),
                origin=row[id_idx],
            )
        )
    return items


def _parse_jsonl(raw: str, source: str) -> list[LabeledSentence]:
    items: list[LabeledSentence] = []
    for line_no, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetFormatError(f"{source}: line {line_no} is not valid JSON: {exc}") from None
        if not isinstance(obj, dict) or "text" not in obj or "aspects" not in obj:
            raise DatasetFormatError(f"{source}: line {line_no} must be an object with 'text' and 'aspects'")
        labels = obj["aspects"]
        if not isinstance(labels, list) or not labels:
            raise DatasetFormatError(f"{source}: line {line_no} has no aspect label")
        try:
            aspects = frozenset(parse_aspect(str(name)) for name in labels)
        except ValueError as exc:
            raise DatasetFormatError(f"{source}: line {line_no}: {exc}") from None
        items.append(
            LabeledSentence(
                sentence=CleanSentence(str(obj["text"])),
                aspects=aspects,
                origin=str(obj.get("id", "")),
            )
        )
    return items


def dataset_stats(ds: Dataset) -> AspectDistribution:
    """Count how many items carry each aspect; rates are 0 on an empty set."""
    counts = {a: 0 for a in ALL_ASPECTS}
    for item in ds.items:
        for aspect in item.aspects:
            counts[aspect] += 1
    total = len(ds.items)
    rates = {a: (counts[a] / total if total else 0.0) for a in ALL_ASPECTS}
    return AspectDistribution(counts=counts, rates=rates, total=total)


def binarize(ds: Dataset, target: Aspect) -> BinaryView:
    """Partition items into target-positive and target-negative, order kept."""
    positives = tuple(item for item in ds.items if target in item.aspects)
    negatives = tuple(item for item in ds.items if target not in item.aspects)
    return BinaryView(target=target, positives=positives, negatives=negatives)


def stats_to_csv(dist: AspectDistribution) -> str:
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(["aspect", "count", "percentage"])
    for aspect, count, pct in dist.rows():
        writer.writerow([aspect, count, pct])
    return out.getvalue()


def stats_to_json(dist: AspectDistribution) -> str:
    payload = {
        "total": dist.total,
        "aspects": [
            {"aspect": a.value, "count": dist.counts[a], "rate": dist.rates[a]}
            for a in ALL_ASPECTS
        ],
    }
    return json.dumps(payload, indent=2)


def labels_for(items: Sequence[LabeledSentence], target: Aspect) -> list[bool]:
    """Per-item flag: does the item carry the target aspect."""
    return [target in item.aspects for item in items]
