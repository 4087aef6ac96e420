"""Experiment configuration: file + flag resolution, defaults, manifests."""

from __future__ import annotations

import hashlib
import json
import platform
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .aspects import ALL_ASPECTS, Aspect, parse_aspect
from .classifier import TrainConfig, default_train_config
from .encoder import ENCODER_REGISTRY, EncoderSpec, tiny_spec
from .evaluation import BASELINE_MODEL, MODEL_ORDER

ALLOWED_MODELS = (BASELINE_MODEL, *MODEL_ORDER)
ENCODER_PROFILES = ("published", "tiny")


@dataclass(frozen=True)
class TinySettings:
    hidden: int = 32
    layers: int = 2
    heads: int = 2


@dataclass(frozen=True)
class SvmSettings:
    c: float = 1.0
    ngram_min: int = 1
    ngram_max: int = 2
    min_df: int = 2


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str
    format: str
    aspects: tuple[Aspect, ...]
    models: tuple[str, ...]
    k: int = 10
    seed: int = 0
    out: str = "runs/latest"
    jobs: int = 1
    encoder_profile: str = "published"
    tiny: TinySettings = TinySettings()
    svm: SvmSettings = SvmSettings()
    overrides: Mapping[str, Mapping[str, Mapping[str, object]]] = field(default_factory=dict)


_CONFIG_KEYS = {
    "dataset", "format", "aspects", "models", "k", "seed", "out", "jobs",
    "encoder_profile", "tiny", "svm", "overrides",
}


def resolve_config(file_values: Mapping[str, object] | None, flag_values: Mapping[str, object]) -> ExperimentConfig:
    """Merge a config file with command-line flags (flags win) and validate.

    Unknown keys, aspect names, or model names are rejected here, before
    any work starts. The result has every default materialized.
    """
    merged: dict[str, object] = {}
    if file_values:
        unknown = set(file_values) - _CONFIG_KEYS
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        merged.update(file_values)
    merged.update({key: value for key, value in flag_values.items() if value is not None})

    dataset = merged.get("dataset")
    if not dataset:
        raise ValueError("a dataset path is required (--dataset or config 'dataset')")
    from .corpus import infer_format

    format = str(merged.get("format") or infer_format(str(dataset)))
    if format not in ("opiner-csv", "jsonl"):
        raise ValueError(f"unknown dataset format {format!r}")

    aspects_raw = merged.get("aspects") or [a.value for a in ALL_ASPECTS]
    if isinstance(aspects_raw, str):
        aspects_raw = [part.strip() for part in aspects_raw.split(",") if part.strip()]
    aspects = tuple(parse_aspect(str(name)) for name in aspects_raw)
    if len(set(aspects)) != len(aspects):
        raise ValueError("duplicate aspect names in config")

    models_raw = merged.get("models") or list(ALLOWED_MODELS)
    if isinstance(models_raw, str):
        models_raw = [part.strip() for part in models_raw.split(",") if part.strip()]
    models = tuple(str(m) for m in models_raw)
    for model in models:
        if model not in ALLOWED_MODELS:
            raise ValueError(f"unknown model {model!r}; expected a subset of {ALLOWED_MODELS}")
    if len(set(models)) != len(models):
        raise ValueError("duplicate model names in config")
    if not models:
        raise ValueError("at least one model is required")

    profile = str(merged.get("encoder_profile", "published"))
    if profile not in ENCODER_PROFILES:
        raise ValueError(f"unknown encoder_profile {profile!r}; expected one of {ENCODER_PROFILES}")

    tiny_raw = merged.get("tiny") or {}
    svm_raw = merged.get("svm") or {}
    overrides = merged.get("overrides") or {}
    _validate_overrides(overrides)

    k = int(merged.get("k", 10))
    if k < 2:
        raise ValueError(f"k must be at least 2, got {k}")
    jobs = int(merged.get("jobs", 1))
    if jobs < 1:
        raise ValueError(f"jobs must be at least 1, got {jobs}")

    return ExperimentConfig(
        dataset=str(dataset),
        format=format,
        aspects=aspects,
        models=models,
        k=k,
        seed=int(merged.get("seed", 0)),
        out=str(merged.get("out", "runs/latest")),
        jobs=jobs,
        encoder_profile=profile,
        tiny=TinySettings(**dict(tiny_raw)),
        svm=SvmSettings(**dict(svm_raw)),
        overrides={str(a): {str(m): dict(v) for m, v in entry.items()} for a, entry in dict(overrides).items()},
    )


def _validate_overrides(overrides) -> None:
    allowed = {"batch_size", "epochs", "learning_rate", "seed"}
    for aspect_name, per_model in dict(overrides).items():
        parse_aspect(str(aspect_name))
        for model_name, values in dict(per_model).items():
            if model_name not in ALLOWED_MODELS:
                raise ValueError(f"override for unknown model {model_name!r}")
            unknown = set(values) - allowed
            if unknown:
                raise ValueError(f"unknown override keys for {aspect_name}/{model_name}: {sorted(unknown)}")


def encoder_spec_for(cfg: ExperimentConfig, model: str) -> EncoderSpec:
    if cfg.encoder_profile == "tiny":
        return tiny_spec(hidden=cfg.tiny.hidden, layers=cfg.tiny.layers, heads=cfg.tiny.heads)
    return ENCODER_REGISTRY[model]


def train_config_for(cfg: ExperimentConfig, aspect: Aspect, model: str) -> TrainConfig:
    """Registry defaults for (aspect, model), with config overrides applied."""
    base = default_train_config(
        aspect,
        seed=cfg.seed,
        encoder=encoder_spec_for(cfg, model),
        model_family=model,
    )
    entry = cfg.overrides.get(aspect.value, {}).get(model, {})
    return TrainConfig(
        aspect=aspect,
        encoder=base.encoder,
        batch_size=int(entry.get("batch_size", base.batch_size)),
        epochs=int(entry.get("epochs", base.epochs)),
        learning_rate=float(entry.get("learning_rate", base.learning_rate)),
        seed=int(entry.get("seed", base.seed)),
    )


def resolved_dict(cfg: ExperimentConfig) -> dict:
    """Fully explicit, deterministic view of the configuration."""
    pairs = {}
    for aspect in cfg.aspects:
        for model in cfg.models:
            if model == BASELINE_MODEL:
                continue
            tc = train_config_for(cfg, aspect, model)
            pairs[f"{aspect.value}/{model}"] = {
                "encoder": tc.encoder.checkpoint_name,
                "batch_size": tc.batch_size,
                "epochs": tc.epochs,
                "learning_rate": tc.learning_rate,
                "seed": tc.seed,
            }
    return {
        "dataset": cfg.dataset,
        "format": cfg.format,
        "aspects": [a.value for a in cfg.aspects],
        "models": list(cfg.models),
        "k": cfg.k,
        "seed": cfg.seed,
        "out": cfg.out,
        "jobs": cfg.jobs,
        "encoder_profile": cfg.encoder_profile,
        "tiny": cfg.tiny.__dict__,
        "svm": cfg.svm.__dict__,
        "overrides": {a: {m: dict(v) for m, v in entry.items()} for a, entry in cfg.overrides.items()},
        "resolved_pairs": pairs,
    }


def resolved_json(cfg: ExperimentConfig) -> str:
    return json.dumps(resolved_dict(cfg), sort_keys=True, indent=2)


def config_hash(cfg: ExperimentConfig) -> str:
    """Hash of the experiment identity; where it runs (out, jobs) is excluded."""
    identity = resolved_dict(cfg)
    identity.pop("out", None)
    identity.pop("jobs", None)
    return hashlib.sha256(json.dumps(identity, sort_keys=True).encode("utf-8")).hexdigest()


def file_sha256(path: str | Path) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(outdir: str | Path, cfg: ExperimentConfig, extra: Mapping[str, object] | None = None) -> Path:
    """Record everything needed to replay the run exactly."""
    from . import __version__

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "tool": f"aspectminer {__version__}",
        "python": platform.python_version(),
        "dataset_sha256": file_sha256(cfg.dataset) if Path(cfg.dataset).exists() else None,
        "config_hash": config_hash(cfg),
        "resolved_config": resolved_dict(cfg),
    }
    if extra:
        manifest.update(extra)
    path = outdir / "manifest.json"
    path.write_text(json.dumps(manifest, sort_keys=True, indent=2), encoding="utf-8")
    return path
