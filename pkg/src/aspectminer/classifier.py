"""Per-aspect binary classifier: pooled encoder vector -> dense(128) ->
dropout(0.25) -> dense(2) -> softmax, trained end to end with no frozen
encoder layers."""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import torch
from torch import nn

from .aspects import Aspect, parse_aspect
from .corpus import BinaryView
from .encoder import (
    EncoderSpec,
    MINI_FAMILY,
    load_encoder,
    load_saved_encoder,
    masked_max,
    registry_spec,
    save_encoder,
    tokenize,
    tiny_spec,
)
from .errors import ModelStoreError, TrainingError
from .preprocess import CleanSentence


@dataclass(frozen=True)
class HeadConfig:
    hidden_units: int = 128
    output_units: int = 2
    dropout_rate: float = 0.25
    init_scheme: str = "glorot-uniform"
    input_dim: int = 768

    def __post_init__(self) -> None:
        if self.output_units != 2:
            raise ValueError("the head is a two-way softmax; output_units must be 2")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if self.init_scheme != "glorot-uniform":
            raise ValueError(f"unsupported init scheme {self.init_scheme!r}")


@dataclass(frozen=True)
class TrainConfig:
    aspect: Aspect
    encoder: EncoderSpec
    batch_size: int
    epochs: int
    learning_rate: float
    seed: int = 0
    class_weighting: bool = False

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")


# Best-performing configuration per aspect: (encoder family, batch, epochs, lr).
# Aspects without a published row fall back to the most common one.
HYPERPARAMETER_REGISTRY: dict[Aspect, tuple[str, int, int, float]] = {
    Aspect.PERFORMANCE: ("RoBERTa", 32, 3, 1e-5),
    Aspect.USABILITY: ("RoBERTa", 32, 3, 1e-5),
    Aspect.SECURITY: ("DistilBERT", 16, 2, 1e-5),
    Aspect.COMMUNITY: ("DistilBERT", 16, 3, 2e-5),
    Aspect.COMPATIBILITY: ("DistilBERT", 16, 3, 2e-5),
    Aspect.PORTABILITY: ("DistilBERT", 16, 3, 2e-5),
    Aspect.DOCUMENTATION: ("RoBERTa", 32, 2, 1e-5),
    Aspect.BUG: ("BERT", 32, 3, 3e-5),
    Aspect.LEGAL: ("DistilBERT", 32, 3, 1e-5),
    Aspect.ONLY_SENTIMENT: ("RoBERTa", 32, 3, 1e-5),
}
_FALLBACK_ROW = ("RoBERTa", 32, 3, 1e-5)


def default_train_config(
    aspect: Aspect,
    seed: int = 0,
    encoder: EncoderSpec | None = None,
    model_family: str | None = None,
) -> TrainConfig:
    """Registry defaults for one aspect.

    ``model_family`` pins the batch/epochs/lr row of that family's best
    aspect entry when the caller wants a specific encoder rather than the
    per-aspect winner; ``encoder`` swaps in an explicit spec (e.g. a Mini
    one) while keeping the registry's training settings.
    """
    family, batch, epochs, lr = HYPERPARAMETER_REGISTRY.get(aspect, _FALLBACK_ROW)
    if model_family is not None:
        family = model_family
    spec = encoder if encoder is not None else registry_spec(family)
    return TrainConfig(
        aspect=aspect,
        encoder=spec,
        batch_size=batch,
        epochs=epochs,
        learning_rate=lr,
        seed=seed,
    )


class ClassifierHead(nn.Module):
    def __init__(self, config: HeadConfig) -> None:
        super().__init__()
        self.config = config
        self.fc1 = nn.Linear(config.input_dim, config.hidden_units)
        self.dropout = nn.Dropout(config.dropout_rate)
        self.fc2 = nn.Linear(config.hidden_units, config.output_units)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.fc2(self.dropout(torch.relu(self.fc1(x))))


def build_head(config: HeadConfig = HeadConfig(), seed: int = 0) -> ClassifierHead:
    """Construct the head with glorot-uniform kernels (biases zero), seeded."""
    head = ClassifierHead(config)
    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for layer in (head.fc1, head.fc2):
            bound = math.sqrt(6.0 / (layer.in_features + layer.out_features))
            layer.weight.uniform_(-bound, bound, generator=gen)
            layer.bias.zero_()
    return head


@dataclass(frozen=True)
class Prediction:
    probabilities: tuple[float, float]  # (p_negative, p_positive)
    decision: str  # "positive" | "negative"

    @property
    def p_positive(self) -> float:
        return self.probabilities[1]


def _softmax_pair(logits: np.ndarray) -> tuple[float, float]:
    shifted = logits.astype(np.float64) - logits.max()
    exp = np.exp(shifted)
    probs = exp / exp.sum()
    return float(probs[0]), float(probs[1])


def prediction_from_logits(logits: np.ndarray) -> Prediction:
    p_neg, p_pos = _softmax_pair(np.asarray(logits, dtype=np.float64))
    # exact 0.5 resolves negative
    return Prediction(probabilities=(p_neg, p_pos), decision="positive" if p_pos > 0.5 else "negative")


def forward(head: ClassifierHead, vector, mode: str = "infer") -> Prediction:
    """Run the head on one pooled vector.

    ``train`` mode keeps dropout active (stochastic); ``infer`` is
    deterministic. Non-finite inputs are rejected.
    """
    if mode not in ("train", "infer"):
        raise ValueError(f"mode must be 'train' or 'infer', got {mode!r}")
    values = getattr(vector, "values", vector)
    x = torch.as_tensor(np.asarray(values, dtype=np.float32))
    if not torch.isfinite(x).all():
        raise ValueError("pooled input vector contains non-finite values")
    head.train(mode == "train")
    with torch.no_grad():
        logits = head(x.unsqueeze(0))[0]
    head.eval()
    return prediction_from_logits(logits.numpy())


@dataclass
class TrainedAspectModel:
    spec: EncoderSpec
    encoder: nn.Module
    head: ClassifierHead
    head_config: HeadConfig
    config: TrainConfig
    training_log: tuple[float, ...]


def _view_tensors(view: BinaryView, spec: EncoderSpec):
    items = list(view.positives) + list(view.negatives)
    sequences = [tokenize(item.sentence, spec) for item in items]
    ids = torch.from_numpy(np.stack([s.ids for s in sequences]))
    mask = torch.from_numpy(np.stack([s.mask for s in sequences]))
    labels = torch.tensor([1] * len(view.positives) + [0] * len(view.negatives), dtype=torch.long)
    return ids, mask, labels


def fine_tune(
    view: BinaryView,
    cfg: TrainConfig,
    encoder: nn.Module | None = None,
    head_config: HeadConfig | None = None,
) -> TrainedAspectModel:
    """Fine-tune encoder + head on one binary view.

    Cross-entropy over the two-way softmax, Adam at the configured rate,
    every encoder layer trainable. Batching keeps the final partial batch;
    shuffling, head init, and dropout all derive from ``cfg.seed``, so a
    rerun reproduces the same per-epoch mean losses. ``encoder`` is copied,
    never mutated in place.
    """
    if not view.positives or not view.negatives:
        raise TrainingError(
            f"cannot fine-tune aspect {view.target.value}: "
            f"{len(view.positives)} positives / {len(view.negatives)} negatives"
        )
    torch.manual_seed(cfg.seed)
    if encoder is None:
        encoder = load_encoder(cfg.encoder, seed=cfg.seed)
    else:
        encoder = copy.deepcopy(encoder)
    if head_config is None:
        head_config = HeadConfig(input_dim=cfg.encoder.hidden)
    head = build_head(head_config, seed=cfg.seed)

    ids, mask, labels = _view_tensors(view, cfg.encoder)
    n = len(labels)
    weight = None
    if cfg.class_weighting:
        pos = labels.sum().item()
        weight = torch.tensor([n / (2.0 * (n - pos)), n / (2.0 * pos)], dtype=torch.float32)

    optimizer = torch.optim.Adam(list(encoder.parameters()) + list(head.parameters()), lr=cfg.learning_rate)
    shuffler = torch.Generator().manual_seed(cfg.seed)
    log: list[float] = []
    for epoch in range(cfg.epochs):
        encoder.train()
        head.train()
        order = torch.randperm(n, generator=shuffler)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            optimizer.zero_grad()
            hidden = encoder(ids[batch], mask[batch])
            logits = head(masked_max(hidden, mask[batch]))
            loss = nn.functional.cross_entropy(logits, labels[batch], weight=weight)
            if not torch.isfinite(loss):
                raise TrainingError(
                    f"training diverged for aspect {view.target.value} "
                    f"at epoch {epoch}, batch {start // cfg.batch_size}: loss={loss.item()}"
                )
            loss.backward()
            optimizer.step()
            total += loss.item() * len(batch)
        log.append(total / n)
    encoder.eval()
    head.eval()
    return TrainedAspectModel(
        spec=cfg.encoder,
        encoder=encoder,
        head=head,
        head_config=head_config,
        config=cfg,
        training_log=tuple(log),
    )


def _pooled_tensor(model: TrainedAspectModel, sentence: CleanSentence | str) -> torch.Tensor:
    seq = tokenize(sentence, model.spec)
    model.encoder.eval()
    with torch.no_grad():
        ids = torch.from_numpy(seq.ids).unsqueeze(0)
        mask = torch.from_numpy(seq.mask).unsqueeze(0)
        return masked_max(model.encoder(ids, mask), mask)


def predict_aspect(model: TrainedAspectModel, sentence: CleanSentence | str) -> Prediction:
    """Deterministic tokenize -> embed -> pool -> head inference."""
    model.head.eval()
    with torch.no_grad():
        logits = model.head(_pooled_tensor(model, sentence))[0]
    return prediction_from_logits(logits.numpy())


@dataclass(frozen=True)
class Detection:
    aspects: frozenset[Aspect]
    probabilities: dict[Aspect, float]  # p_positive per aspect


def detect_aspects(models: Mapping[Aspect, TrainedAspectModel], sentence: CleanSentence | str) -> Detection:
    """Run every per-aspect model on one sentence.

    Encoder forward passes are shared between models that hold the same
    encoder instance (and therefore identical weights); independently
    fine-tuned encoders are never conflated.
    """
    if not models:
        raise ValueError("detect_aspects requires at least one model")
    pooled_cache: dict[int, torch.Tensor] = {}
    probabilities: dict[Aspect, float] = {}
    detected = set()
    for aspect, model in models.items():
        key = id(model.encoder)
        if key not in pooled_cache:
            pooled_cache[key] = _pooled_tensor(model, sentence)
        model.head.eval()
        with torch.no_grad():
            logits = model.head(pooled_cache[key])[0]
        pred = prediction_from_logits(logits.numpy())
        probabilities[aspect] = pred.p_positive
        if pred.decision == "positive":
            detected.add(aspect)
    return Detection(aspects=frozenset(detected), probabilities=probabilities)


# ---------------------------------------------------------------------------
# Model directory layout: encoder/, head.pt, head_config.json,
# train_config.json, training_log.json, manifest.json (with content hashes).
# ---------------------------------------------------------------------------


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def save_model(model: TrainedAspectModel, directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_encoder(model.encoder, directory / "encoder")
    torch.save(model.head.state_dict(), directory / "head.pt")
    (directory / "head_config.json").write_text(json.dumps(model.head_config.__dict__, indent=2), encoding="utf-8")
    train_config = {
        "aspect": model.config.aspect.value,
        "encoder": model.config.encoder.__dict__,
        "batch_size": model.config.batch_size,
        "epochs": model.config.epochs,
        "learning_rate": model.config.learning_rate,
        "seed": model.config.seed,
        "class_weighting": model.config.class_weighting,
    }
    (directory / "train_config.json").write_text(json.dumps(train_config, indent=2), encoding="utf-8")
    (directory / "training_log.json").write_text(json.dumps(list(model.training_log)), encoding="utf-8")
    files = sorted(
        str(p.relative_to(directory))
        for p in directory.rglob("*")
        if p.is_file() and p.name != "manifest.json"
    )
    manifest = {
        "format": "aspectminer-model-v1",
        "aspect": model.config.aspect.value,
        "files": {name: _sha256(directory / name) for name in files},
    }
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2), encoding="utf-8")


def load_model(directory: str | Path) -> TrainedAspectModel:
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelStoreError(f"cannot read model manifest in {directory}: {exc}") from exc
    aspect_name = manifest.get("aspect", "?")
    for name, expected in manifest.get("files", {}).items():
        target = directory / name
        if not target.exists() or _sha256(target) != expected:
            raise ModelStoreError(
                f"model for aspect {aspect_name!r} is corrupt: hash mismatch on {name}"
            )
    raw = json.loads((directory / "train_config.json").read_text(encoding="utf-8"))
    spec = EncoderSpec(**raw["encoder"])
    config = TrainConfig(
        aspect=parse_aspect(raw["aspect"]),
        encoder=spec,
        batch_size=raw["batch_size"],
        epochs=raw["epochs"],
        learning_rate=raw["learning_rate"],
        seed=raw["seed"],
        class_weighting=raw.get("class_weighting", False),
    )
    head_config = HeadConfig(**json.loads((directory / "head_config.json").read_text(encoding="utf-8")))
    head = ClassifierHead(head_config)
    head.load_state_dict(torch.load(directory / "head.pt", weights_only=True))
    head.eval()
    encoder = load_saved_encoder(directory / "encoder")
    encoder.eval()
    training_log = tuple(json.loads((directory / "training_log.json").read_text(encoding="utf-8")))
    return TrainedAspectModel(
        spec=spec,
        encoder=encoder,
        head=head,
        head_config=head_config,
        config=config,
        training_log=training_log,
    )
