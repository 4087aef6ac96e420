"""Command-line interface: stats, train, evaluate, predict, report.

Exit codes: 0 success, 1 partial or full experiment failure, 2 usage or
configuration error. Per-fold progress goes to standard error; files carry
the machine-readable results.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .aspects import Aspect, parse_aspect
from .baseline import VocabConfig, fit_vocabulary, save_svm, train_svm
from .classifier import detect_aspects, fine_tune, load_model, save_model
from .config import (
    ALLOWED_MODELS,
    ExperimentConfig,
    file_sha256,
    resolve_config,
    resolved_json,
    train_config_for,
    write_manifest,
)
from .corpus import binarize, dataset_stats, load_dataset, stats_to_csv, stats_to_json
from .errors import (
    AspectMinerError,
    ConfigurationError,
    DatasetFormatError,
    DatasetLoadError,
    EncoderLoadError,
    ModelStoreError,
    TrainingError,
)
from .evaluation import BASELINE_MODEL, cross_validate, compare, finetune_trainer, svm_trainer
from .preprocess import clean_text
from .report import render_report, report_from_json, write_distribution_figure, write_report_files

_USAGE_ERRORS = (
    ValueError,
    DatasetLoadError,
    DatasetFormatError,
    ConfigurationError,
    ModelStoreError,
    EncoderLoadError,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aspectminer", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--dataset", help="Dataset file path.")
        p.add_argument("--format", choices=("opiner-csv", "jsonl"), help="Dataset format (inferred from suffix by default).")
        p.add_argument("--aspects", help="Comma-separated aspects (default: all 11).")
        p.add_argument("--models", help=f"Comma-separated models, subset of {ALLOWED_MODELS}.")
        p.add_argument("--k", type=int, help="Number of cross-validation folds (default 10).")
        p.add_argument("--seed", type=int, help="Base seed (default 0).")
        p.add_argument("--out", help="Output directory.")
        p.add_argument("--jobs", type=int, help="Parallel (aspect, model) workers (default 1).")
        p.add_argument("--config", help="JSON config file; flags override its values.")

    p_stats = sub.add_parser("stats", help="Print the aspect distribution of a dataset.")
    p_stats.add_argument("--dataset", required=True)
    p_stats.add_argument("--format", choices=("opiner-csv", "jsonl"))
    p_stats.add_argument("--out", help="Also write stats.csv/stats.json and a distribution figure here.")
    p_stats.set_defaults(func=cmd_stats)

    p_train = sub.add_parser("train", help="Train one model per (aspect, model) pair on the full dataset.")
    add_common(p_train)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("evaluate", help="Cross-validate (aspect, model) pairs and write a comparison report.")
    add_common(p_eval)
    p_eval.set_defaults(func=cmd_evaluate)

    p_pred = sub.add_parser("predict", help="Detect aspects in sentences with trained models.")
    p_pred.add_argument("--models", required=True, help="Directory holding per-aspect model directories.")
    p_pred.add_argument("--text", help="One sentence to classify.")
    p_pred.add_argument("--input", help="File with one sentence per line.")
    p_pred.add_argument("--out", help="Write JSON lines here instead of stdout.")
    p_pred.set_defaults(func=cmd_predict)

    p_rep = sub.add_parser("report", help="Re-render an existing JSON report.")
    p_rep.add_argument("--json", required=True, dest="json_path", help="Existing report.json file.")
    p_rep.add_argument("--out", help="Directory for re-rendered csv/md/figures.")
    p_rep.set_defaults(func=cmd_report)
    return parser


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    file_values = None
    if args.config:
        try:
            file_values = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ValueError(f"cannot read config file {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ValueError(f"config file {args.config} is not valid JSON: {exc}") from exc
    flags = {
        "dataset": args.dataset,
        "format": args.format,
        "aspects": args.aspects,
        "models": args.models,
        "k": args.k,
        "seed": args.seed,
        "out": args.out,
        "jobs": args.jobs,
    }
    return resolve_config(file_values, flags)


def cmd_stats(args: argparse.Namespace) -> int:
    ds = load_dataset(args.dataset, args.format)
    dist = dataset_stats(ds)
    print(f"dataset: {ds.name} ({dist.total} sentences)")
    for aspect, count, pct in dist.rows():
        print(f"{aspect:<14} {count:>6} {pct:>3}%")
    if args.out:
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "stats.csv").write_text(stats_to_csv(dist), encoding="utf-8")
        (outdir / "stats.json").write_text(stats_to_json(dist), encoding="utf-8")
        figure = write_distribution_figure(dist, outdir)
        print(f"wrote {outdir / 'stats.csv'}, {outdir / 'stats.json'}, {figure}", file=sys.stderr)
    return 0


def _pairs(cfg: ExperimentConfig) -> list[tuple[Aspect, str]]:
    return [(aspect, model) for aspect in cfg.aspects for model in cfg.models]


def _train_pair_payload(cfg: ExperimentConfig, aspect: Aspect, model: str, outdir: str) -> dict:
    return {
        "mode": "train",
        "config": resolved_json(cfg),
        "aspect": aspect.value,
        "model": model,
        "outdir": outdir,
    }


def _evaluate_pair_payload(cfg: ExperimentConfig, aspect: Aspect, model: str) -> dict:
    return {
        "mode": "evaluate",
        "config": resolved_json(cfg),
        "aspect": aspect.value,
        "model": model,
    }


def _cfg_from_payload(payload: dict) -> ExperimentConfig:
    raw = json.loads(payload["config"])
    raw.pop("resolved_pairs", None)
    return resolve_config(raw, {})


def _run_pair(payload: dict) -> dict:
    """Worker entry for one (aspect, model) pair; returns a result payload."""
    from .report import _result_payload  # local import keeps worker deps lean

    cfg = _cfg_from_payload(payload)
    aspect = parse_aspect(payload["aspect"])
    model = payload["model"]
    ds = load_dataset(cfg.dataset, cfg.format)
    if payload["mode"] == "evaluate":
        result = _evaluate_pair(cfg, ds, aspect, model)
        return {"ok": True, "result": _result_payload(result)}
    _train_pair(cfg, ds, aspect, model, Path(payload["outdir"]))
    return {"ok": True}


def _svm_config_summary(cfg: ExperimentConfig) -> dict:
    return {
        "C": cfg.svm.c,
        "ngram_min": cfg.svm.ngram_min,
        "ngram_max": cfg.svm.ngram_max,
        "min_df": cfg.svm.min_df,
        "seed": cfg.seed,
    }


def _train_config_summary(tc) -> dict:
    return {
        "encoder": tc.encoder.checkpoint_name,
        "batch_size": tc.batch_size,
        "epochs": tc.epochs,
        "learning_rate": tc.learning_rate,
        "seed": tc.seed,
    }


def _evaluate_pair(cfg: ExperimentConfig, ds, aspect: Aspect, model: str):
    def progress(fold: int, metrics) -> None:
        print(
            f"[{aspect.value}/{model}] fold {fold}: "
            f"P={metrics.precision:.3f} R={metrics.recall:.3f} F1={metrics.f1:.3f}",
            file=sys.stderr,
        )

    if model == BASELINE_MODEL:
        trainer = svm_trainer(
            c=cfg.svm.c,
            ngram_range=(cfg.svm.ngram_min, cfg.svm.ngram_max),
            min_df=cfg.svm.min_df,
        )
        summary = _svm_config_summary(cfg)
    else:
        tc = train_config_for(cfg, aspect, model)
        trainer = finetune_trainer(tc.encoder, tc.batch_size, tc.epochs, tc.learning_rate)
        summary = _train_config_summary(tc)
    return cross_validate(
        ds, aspect, trainer, k=cfg.k, seed=cfg.seed, model_name=model, config=summary, progress=progress
    )


def _train_pair(cfg: ExperimentConfig, ds, aspect: Aspect, model: str, outdir: Path) -> None:
    view = binarize(ds, aspect)
    pair_dir = outdir / "models" / f"{aspect.value}__{model}"
    if model == BASELINE_MODEL:
        sentences = [item.sentence for item in ds.items]
        vocab = fit_vocabulary(
            sentences,
            VocabConfig(ngram_range=(cfg.svm.ngram_min, cfg.svm.ngram_max), min_df=cfg.svm.min_df),
        )
        print(f"[{aspect.value}/SVM] vocabulary size {vocab.size}", file=sys.stderr)
        svm = train_svm(view, vocab, c=cfg.svm.c, seed=cfg.seed)
        pair_dir.mkdir(parents=True, exist_ok=True)
        save_svm(svm, pair_dir / "svm.json")
    else:
        tc = train_config_for(cfg, aspect, model)
        trained = fine_tune(view, tc)
        save_model(trained, pair_dir)


def _run_pairs(cfg: ExperimentConfig, payloads: list[dict]) -> list[dict]:
    if cfg.jobs <= 1:
        outcomes = []
        ds = load_dataset(cfg.dataset, cfg.format)
        for payload in payloads:
            aspect = parse_aspect(payload["aspect"])
            model = payload["model"]
            try:
                if payload["mode"] == "evaluate":
                    from .report import _result_payload

                    result = _evaluate_pair(cfg, ds, aspect, model)
                    outcomes.append({"ok": True, "result": _result_payload(result)})
                else:
                    _train_pair(cfg, ds, aspect, model, Path(payload["outdir"]))
                    outcomes.append({"ok": True})
            except (AspectMinerError, ValueError) as exc:
                outcomes.append({"ok": False, "error": str(exc)})
        return outcomes
    outcomes = []
    with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
        futures = [pool.submit(_run_pair, payload) for payload in payloads]
        for future in futures:
            try:
                outcomes.append(future.result())
            except Exception as exc:  # worker errors arrive as plain exceptions
                outcomes.append({"ok": False, "error": str(exc)})
    return outcomes


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    pairs = _pairs(cfg)
    payloads = [_train_pair_payload(cfg, aspect, model, str(outdir)) for aspect, model in pairs]
    outcomes = _run_pairs(cfg, payloads)
    statuses = {}
    failures = 0
    for (aspect, model), outcome in zip(pairs, outcomes):
        key = f"{aspect.value}/{model}"
        if outcome["ok"]:
            statuses[key] = {"status": "trained"}
        else:
            failures += 1
            statuses[key] = {"status": "failed", "error": outcome["error"]}
            print(f"[{key}] training failed: {outcome['error']}", file=sys.stderr)
    write_manifest(outdir, cfg, extra={"pairs": statuses})
    print(f"trained {len(pairs) - failures}/{len(pairs)} pairs; manifest at {outdir / 'manifest.json'}")
    return 1 if failures else 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    pairs = _pairs(cfg)
    payloads = [_evaluate_pair_payload(cfg, aspect, model) for aspect, model in pairs]
    outcomes = _run_pairs(cfg, payloads)

    from .report import _result_from

    results = []
    baseline = []
    statuses = {}
    failures = 0
    for (aspect, model), outcome in zip(pairs, outcomes):
        key = f"{aspect.value}/{model}"
        if outcome["ok"]:
            statuses[key] = {"status": "evaluated"}
            result = _result_from(outcome["result"])
            (baseline if model == BASELINE_MODEL else results).append(result)
        else:
            failures += 1
            statuses[key] = {"status": "failed", "error": outcome["error"]}
            print(f"[{key}] evaluation failed: {outcome['error']}", file=sys.stderr)

    if not results and not baseline:
        print("all (aspect, model) pairs failed; no report written", file=sys.stderr)
        write_manifest(outdir, cfg, extra={"pairs": statuses})
        return 1
    report = compare(results, baseline)
    write_report_files(report, outdir)
    write_manifest(outdir, cfg, extra={"pairs": statuses})
    print(render_report(report, "markdown"))
    return 1 if failures else 0


def cmd_predict(args: argparse.Namespace) -> int:
    if bool(args.text) == bool(args.input):
        raise ValueError("predict needs exactly one of --text or --input")
    models_dir = Path(args.models)
    model_dirs = sorted(p for p in models_dir.iterdir() if (p / "manifest.json").exists()) if models_dir.is_dir() else []
    if not model_dirs:
        raise ValueError(f"no trained aspect models found under {models_dir}")
    models = {}
    for model_dir in model_dirs:
        trained = load_model(model_dir)
        models[trained.config.aspect] = trained
    lines = [args.text] if args.text else Path(args.input).read_text(encoding="utf-8").splitlines()

    sink = Path(args.out).open("w", encoding="utf-8") if args.out else sys.stdout
    try:
        for line in lines:
            cleaned = clean_text(line)
            detection = detect_aspects(models, cleaned)
            record = {
                "text": line,
                "clean": cleaned.text,
                "aspects": sorted(a.value for a in detection.aspects),
                "probabilities": {a.value: detection.probabilities[a] for a in sorted(detection.probabilities, key=lambda x: x.value)},
            }
            print(json.dumps(record), file=sink)
    finally:
        if sink is not sys.stdout:
            sink.close()
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    try:
        text = Path(args.json_path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ValueError(f"cannot read report JSON {args.json_path}: {exc}") from exc
    report = report_from_json(text)
    if args.out:
        write_report_files(report, args.out)
        print(f"re-rendered report into {args.out}", file=sys.stderr)
    print(render_report(report, "markdown"))
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TrainingError as exc:
        print(f"training error: {exc}", file=sys.stderr)
        return 1
    except AspectMinerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
