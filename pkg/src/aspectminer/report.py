"""Rendering of comparison reports: delimited text, markdown, JSON, and
bar-chart figures written next to the delimited output."""

from __future__ import annotations

import csv
import hashlib
import io
import json
from pathlib import Path
from typing import Mapping

from .aspects import Aspect, parse_aspect
from .corpus import round_half_up
from .evaluation import (
    AspectResult,
    BASELINE_MODEL,
    ComparisonReport,
    ConfusionCounts,
    METRIC_NAMES,
    Metrics,
    order_models,
)

REPORT_FORMATS = ("csv", "json", "markdown")
_METRIC_LABEL = {"precision": "P", "recall": "R", "f1": "F1"}


def _fmt2(value: float) -> str:
    return f"{round_half_up(value, 2):.2f}"


def _aspects_of(report: ComparisonReport) -> list[Aspect]:
    aspects = {aspect for aspect, _ in report.cells}
    aspects.update(report.baseline)
    return sorted(aspects, key=lambda a: a.value)


def _models_of(report: ComparisonReport) -> list[str]:
    return order_models(name for _, name in report.cells)


def render_report(report: ComparisonReport, format: str) -> str:
    """Serialize a comparison report.

    Human formats (csv, markdown) lay aspects x metrics out against model
    columns with the baseline last and values rounded to two decimals; JSON
    keeps full precision plus per-fold detail and round-trips losslessly.
    """
    if format == "csv":
        return _render_csv(report)
    if format == "json":
        return _render_json(report)
    if format == "markdown":
        return _render_markdown(report)
    raise ValueError(f"unknown report format {format!r}; expected one of {REPORT_FORMATS}")


def _cell_value(report: ComparisonReport, aspect: Aspect, model: str, metric: str) -> float | None:
    result = report.cells.get((aspect, model))
    if result is None:
        return None
    return getattr(result.mean, metric)


def _render_csv(report: ComparisonReport) -> str:
    models = _models_of(report)
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(["aspect", "metric", *models, BASELINE_MODEL])
    for aspect in _aspects_of(report):
        for metric in METRIC_NAMES:
            row: list[str] = [aspect.value, _METRIC_LABEL[metric]]
            for model in models:
                value = _cell_value(report, aspect, model, metric)
                row.append("" if value is None else _fmt2(value))
            base = report.baseline.get(aspect)
            row.append("" if base is None else _fmt2(getattr(base.mean, metric)))
            writer.writerow(row)
    return out.getvalue()


def _render_markdown(report: ComparisonReport) -> str:
    models = _models_of(report)
    lines = ["# Aspect detection report", ""]
    header = "| Metric | " + " | ".join([*models, BASELINE_MODEL]) + " |"
    divider = "|---" * (len(models) + 2) + "|"
    for aspect in _aspects_of(report):
        lines.append(f"## {aspect.value}")
        lines.append("")
        lines.append(header)
        lines.append(divider)
        for metric in METRIC_NAMES:
            cells = []
            for model in models:
                value = _cell_value(report, aspect, model, metric)
                cells.append("-" if value is None else _fmt2(value))
            base = report.baseline.get(aspect)
            cells.append("-" if base is None else _fmt2(getattr(base.mean, metric)))
            lines.append(f"| {_METRIC_LABEL[metric]} | " + " | ".join(cells) + " |")
        lines.append("")
    lines.append("## Best models")
    lines.append("")
    for metric in METRIC_NAMES:
        lines.append(f"### By {metric}")
        lines.append("")
        lines.append("| Aspect | Best model | Improvement over baseline | Settings |")
        lines.append("|---|---|---|---|")
        for aspect in _aspects_of(report):
            best = report.best_by.get(metric, {}).get(aspect)
            if best is None:
                continue
            gain = report.improvement.get(metric, {}).get(aspect)
            # pre-round kills float noise right below a .5 boundary
            gain_text = "-" if gain is None else f"{round_half_up(round(100.0 * gain, 6))}%"
            result = report.cells[(aspect, best)]
            settings = "-"
            if result.config:
                settings = " ".join(f"{k}={result.config[k]}" for k in sorted(result.config))
            lines.append(f"| {aspect.value} | {best} | {gain_text} | {settings} |")
        lines.append("")
    return "\n".join(lines)


def _metrics_payload(m: Metrics) -> dict:
    return {"precision": m.precision, "recall": m.recall, "f1": m.f1}


def _config_hash(config: Mapping | None) -> str | None:
    if config is None:
        return None
    return hashlib.sha256(json.dumps(dict(config), sort_keys=True).encode("utf-8")).hexdigest()


def _result_payload(result: AspectResult) -> dict:
    return {
        "aspect": result.aspect.value,
        "model": result.model_name,
        "seed": result.seed,
        "config": dict(result.config) if result.config is not None else None,
        "config_hash": _config_hash(result.config),
        "per_fold": [_metrics_payload(m) for m in result.per_fold],
        "mean": _metrics_payload(result.mean),
        "pooled": _metrics_payload(result.pooled),
        "pooled_counts": {
            "tp": result.pooled_counts.tp,
            "fp": result.pooled_counts.fp,
            "fn": result.pooled_counts.fn,
            "tn": result.pooled_counts.tn,
        },
    }


def _render_json(report: ComparisonReport) -> str:
    from . import __version__

    payload = {
        "format": "aspectminer-report-v1",
        "version": __version__,
        "cells": [_result_payload(r) for _, r in sorted(report.cells.items(), key=lambda kv: (kv[0][0].value, kv[0][1]))],
        "baseline": [_result_payload(r) for _, r in sorted(report.baseline.items(), key=lambda kv: kv[0].value)],
        "best_by": {
            metric: {aspect.value: model for aspect, model in sorted(mapping.items(), key=lambda kv: kv[0].value)}
            for metric, mapping in report.best_by.items()
        },
        "improvement": {
            metric: {aspect.value: value for aspect, value in sorted(mapping.items(), key=lambda kv: kv[0].value)}
            for metric, mapping in report.improvement.items()
        },
    }
    return json.dumps(payload, indent=2)


def _metrics_from(payload: Mapping) -> Metrics:
    return Metrics(precision=payload["precision"], recall=payload["recall"], f1=payload["f1"])


def _result_from(payload: Mapping) -> AspectResult:
    counts = payload["pooled_counts"]
    return AspectResult(
        aspect=parse_aspect(payload["aspect"]),
        model_name=payload["model"],
        per_fold=tuple(_metrics_from(m) for m in payload["per_fold"]),
        mean=_metrics_from(payload["mean"]),
        pooled=_metrics_from(payload["pooled"]),
        pooled_counts=ConfusionCounts(tp=counts["tp"], fp=counts["fp"], fn=counts["fn"], tn=counts["tn"]),
        seed=payload["seed"],
        config=payload["config"],
    )


def report_from_json(text: str) -> ComparisonReport:
    payload = json.loads(text)
    if payload.get("format") != "aspectminer-report-v1":
        raise ValueError("not an aspectminer report JSON document")
    cells = {}
    for entry in payload["cells"]:
        result = _result_from(entry)
        cells[(result.aspect, result.model_name)] = result
    baseline = {}
    for entry in payload["baseline"]:
        result = _result_from(entry)
        baseline[result.aspect] = result
    best_by = {
        metric: {parse_aspect(name): model for name, model in mapping.items()}
        for metric, mapping in payload["best_by"].items()
    }
    improvement = {
        metric: {parse_aspect(name): value for name, value in mapping.items()}
        for metric, mapping in payload["improvement"].items()
    }
    return ComparisonReport(cells=cells, baseline=baseline, best_by=best_by, improvement=improvement)


def write_report_files(report: ComparisonReport, outdir: str | Path, basename: str = "report") -> list[Path]:
    """Write report.csv/json/md plus one bar-chart figure per metric."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    for format, suffix in (("csv", "csv"), ("json", "json"), ("markdown", "md")):
        path = outdir / f"{basename}.{suffix}"
        path.write_text(render_report(report, format), encoding="utf-8")
        written.append(path)
    written.extend(write_report_figures(report, outdir, basename=basename))
    return written


def write_report_figures(report: ComparisonReport, outdir: str | Path, basename: str = "report") -> list[Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    aspects = _aspects_of(report)
    models = _models_of(report)
    columns = [*models, BASELINE_MODEL] if report.baseline else list(models)
    written = []
    for metric in METRIC_NAMES:
        fig, ax = plt.subplots(figsize=(max(6.0, 1.2 * len(aspects)), 4.0))
        width = 0.8 / max(len(columns), 1)
        for pos, model in enumerate(columns):
            values = []
            for aspect in aspects:
                if model == BASELINE_MODEL and aspect in report.baseline:
                    values.append(getattr(report.baseline[aspect].mean, metric))
                else:
                    values.append(_cell_value(report, aspect, model, metric) or 0.0)
            offsets = [i + (pos - (len(columns) - 1) / 2.0) * width for i in range(len(aspects))]
            ax.bar(offsets, values, width=width, label=model)
        ax.set_xticks(range(len(aspects)))
        ax.set_xticklabels([a.value for a in aspects], rotation=30, ha="right")
        ax.set_ylabel(metric)
        ax.set_ylim(0.0, 1.0)
        ax.legend(fontsize=8)
        ax.set_title(f"Mean {metric} by aspect")
        fig.tight_layout()
        path = outdir / f"{basename}_{metric}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written


def write_distribution_figure(dist, outdir: str | Path, basename: str = "distribution") -> Path:
    """Bar chart of per-aspect sample counts."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    rows = dist.rows()
    fig, ax = plt.subplots(figsize=(max(6.0, 0.9 * len(rows)), 4.0))
    ax.bar(range(len(rows)), [count for _, count, _ in rows], color="#4878d0")
    ax.set_xticks(range(len(rows)))
    ax.set_xticklabels([name for name, _, _ in rows], rotation=30, ha="right")
    ax.set_ylabel("samples")
    ax.set_title(f"Aspect distribution ({dist.total} sentences)")
    fig.tight_layout()
    path = outdir / f"{basename}.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
