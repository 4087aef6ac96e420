"""10-fold cross-validation harness, metric computation, and model-vs-model
comparison assembly."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .aspects import Aspect
from .corpus import BinaryView, Dataset, labels_for
from .errors import TrainingError
from .preprocess import CleanSentence

# Column/tie-break order for transformer models; the baseline comes last.
MODEL_ORDER = ("RoBERTa", "BERT", "XLNet", "DistilBERT")
BASELINE_MODEL = "SVM"
METRIC_NAMES = ("precision", "recall", "f1")

# trainer(sentences, labels, seed=..., aspect=...) -> predict(sentences) -> [bool]
Predictor = Callable[[Sequence[CleanSentence]], list[bool]]
Trainer = Callable[..., Predictor]


@dataclass(frozen=True)
class FoldSplit:
    fold_index: int
    train_indices: tuple[int, ...]
    test_indices: tuple[int, ...]


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class AspectResult:
    """Cross-validated scores for one (aspect, model) pair.

    ``mean`` averages the per-fold metrics (macro over folds); ``pooled``
    recomputes them from summed confusion counts, which differs on
    imbalanced folds and is reported alongside.
    """

    aspect: Aspect
    model_name: str
    per_fold: tuple[Metrics, ...]
    mean: Metrics
    pooled: Metrics
    pooled_counts: ConfusionCounts
    seed: int = 0
    config: Mapping[str, object] | None = None


@dataclass(frozen=True)
class ComparisonReport:
    cells: Mapping[tuple[Aspect, str], AspectResult]
    baseline: Mapping[Aspect, AspectResult]
    best_by: Mapping[str, Mapping[Aspect, str]]
    improvement: Mapping[str, Mapping[Aspect, float]]


def kfold_split(
    n: int,
    k: int = 10,
    seed: int = 0,
    labels: Sequence[bool] | None = None,
) -> list[FoldSplit]:
    """Deterministic k-fold partition, stratified when labels allow.

    Fold sizes differ by at most one; with labels given and at least k
    positives, per-fold positive counts also differ by at most one. Fewer
    positives than folds falls back to an unstratified split with a
    warning.
    """
    if k < 2:
        raise ValueError(f"k must be at least 2, got {k}")
    if n < k:
        raise ValueError(f"cannot split {n} items into {k} folds")
    rng = np.random.default_rng(seed)
    if labels is not None and len(labels) != n:
        raise ValueError(f"labels length {len(labels)} does not match n={n}")

    if labels is not None:
        positives = [i for i, flag in enumerate(labels) if flag]
        if 0 < len(positives) < k:
            warnings.warn(
                f"only {len(positives)} positives for {k} folds; falling back to unstratified split",
                stacklevel=2,
            )
            labels = None

    if labels is None:
        order = rng.permutation(n)
        assignments = _spread(n, k, range(k))
        return _folds_from_order(order, assignments, n, k)

    positives = np.array([i for i, flag in enumerate(labels) if flag])
    negatives = np.array([i for i, flag in enumerate(labels) if not flag])
    rng.shuffle(positives)
    rng.shuffle(negatives)
    # Extra positives go to the first folds, extra negatives to the last,
    # so total fold sizes stay within one of each other.
    pos_counts = _spread(len(positives), k, range(k))
    neg_counts = _spread(len(negatives), k, range(k - 1, -1, -1))
    test_sets: list[list[int]] = [[] for _ in range(k)]
    pos_cursor = neg_cursor = 0
    for fold in range(k):
        test_sets[fold].extend(positives[pos_cursor : pos_cursor + pos_counts[fold]])
        pos_cursor += pos_counts[fold]
        test_sets[fold].extend(negatives[neg_cursor : neg_cursor + neg_counts[fold]])
        neg_cursor += neg_counts[fold]
    all_indices = set(range(n))
    splits = []
    for fold in range(k):
        test = tuple(sorted(test_sets[fold]))
        train = tuple(sorted(all_indices.difference(test)))
        splits.append(FoldSplit(fold_index=fold, train_indices=train, test_indices=test))
    return splits


def _spread(total: int, k: int, extra_order) -> list[int]:
    """Split ``total`` into k near-equal counts, extras along ``extra_order``."""
    base, remainder = divmod(total, k)
    counts = [base] * k
    for fold in list(extra_order)[:remainder]:
        counts[fold] += 1
    return counts


def _folds_from_order(order: np.ndarray, sizes: list[int], n: int, k: int) -> list[FoldSplit]:
    splits = []
    cursor = 0
    all_indices = set(range(n))
    for fold in range(k):
        test = tuple(sorted(int(i) for i in order[cursor : cursor + sizes[fold]]))
        cursor += sizes[fold]
        train = tuple(sorted(all_indices.difference(test)))
        splits.append(FoldSplit(fold_index=fold, train_indices=train, test_indices=test))
    return splits


def confusion(predictions: Sequence[bool], gold: Sequence[bool]) -> ConfusionCounts:
    """Count outcomes with "positive" meaning the aspect is present."""
    if len(predictions) != len(gold):
        raise ValueError(f"length mismatch: {len(predictions)} predictions vs {len(gold)} gold labels")
    tp = fp = fn = tn = 0
    for pred, actual in zip(predictions, gold):
        if pred and actual:
            tp += 1
        elif pred and not actual:
            fp += 1
        elif not pred and actual:
            fn += 1
        else:
            tn += 1
    return ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=tn)


def precision_recall_f1(c: ConfusionCounts) -> Metrics:
    """Standard P/R/F1 with the zero-denominator convention of 0."""
    precision = c.tp / (c.tp + c.fp) if (c.tp + c.fp) else 0.0
    recall = c.tp / (c.tp + c.fn) if (c.tp + c.fn) else 0.0
    f1 = 2 * precision * recall / (precision + recall) if (precision + recall) else 0.0
    return Metrics(precision=precision, recall=recall, f1=f1)


def _mean_metrics(per_fold: Sequence[Metrics]) -> Metrics:
    if not per_fold:
        return Metrics(0.0, 0.0, 0.0)
    return Metrics(
        precision=sum(m.precision for m in per_fold) / len(per_fold),
        recall=sum(m.recall for m in per_fold) / len(per_fold),
        f1=sum(m.f1 for m in per_fold) / len(per_fold),
    )


def fold_seed(seed: int, fold_index: int) -> int:
    return (seed * 100003 + fold_index) % (2**31 - 1)


def cross_validate(
    ds: Dataset,
    aspect: Aspect,
    trainer: Trainer,
    k: int = 10,
    seed: int = 0,
    model_name: str = "model",
    config: Mapping[str, object] | None = None,
    progress: Callable[[int, Metrics], None] | None = None,
) -> AspectResult:
    """Stratified k-fold evaluation of one trainer on one aspect.

    Each fold's trainer sees only that fold's training sentences (all
    feature fitting included), predicts the held-out fold, and contributes
    one Metrics row; the mean is the arithmetic average over folds.
    ``progress`` is invoked once per completed fold.
    """
    sentences = [item.sentence for item in ds.items]
    gold = labels_for(ds.items, aspect)
    splits = kfold_split(len(ds.items), k=k, seed=seed, labels=gold)
    per_fold: list[Metrics] = []
    tp = fp = fn = tn = 0
    for split in splits:
        train_sents = [sentences[i] for i in split.train_indices]
        train_labels = [gold[i] for i in split.train_indices]
        test_sents = [sentences[i] for i in split.test_indices]
        test_labels = [gold[i] for i in split.test_indices]
        try:
            predictor = trainer(train_sents, train_labels, seed=fold_seed(seed, split.fold_index), aspect=aspect)
            predictions = predictor(test_sents)
        except TrainingError as exc:
            raise TrainingError(f"fold {split.fold_index}: {exc}") from exc
        counts = confusion(predictions, test_labels)
        per_fold.append(precision_recall_f1(counts))
        if progress is not None:
            progress(split.fold_index, per_fold[-1])
        tp, fp, fn, tn = tp + counts.tp, fp + counts.fp, fn + counts.fn, tn + counts.tn
    pooled_counts = ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=tn)
    return AspectResult(
        aspect=aspect,
        model_name=model_name,
        per_fold=tuple(per_fold),
        mean=_mean_metrics(per_fold),
        pooled=precision_recall_f1(pooled_counts),
        pooled_counts=pooled_counts,
        seed=seed,
        config=config,
    )


def _model_rank(name: str) -> tuple[int, str]:
    try:
        return (MODEL_ORDER.index(name), name)
    except ValueError:
        return (len(MODEL_ORDER), name)


def order_models(names) -> list[str]:
    return sorted(set(names), key=_model_rank)


def compare(results: Sequence[AspectResult], baseline: Sequence[AspectResult] = ()) -> ComparisonReport:
    """Assemble the (aspect, model) cell grid and the per-metric winners.

    ``best_by[metric][aspect]`` is the model with the highest mean metric,
    ties resolved by the fixed model order. Relative improvement over the
    baseline is (best - baseline) / baseline, omitted when no baseline row
    exists or the baseline value is zero. A baseline-only comparison is
    allowed (the cell grid stays empty).
    """
    if not results and not baseline:
        raise ValueError("compare requires at least one result")
    cells: dict[tuple[Aspect, str], AspectResult] = {}
    for result in results:
        key = (result.aspect, result.model_name)
        if key in cells:
            raise ValueError(f"duplicate result for aspect {result.aspect.value}, model {result.model_name}")
        cells[key] = result
    baseline_map: dict[Aspect, AspectResult] = {}
    for result in baseline:
        if result.aspect in baseline_map:
            raise ValueError(f"duplicate baseline result for aspect {result.aspect.value}")
        baseline_map[result.aspect] = result

    aspects = sorted({aspect for aspect, _ in cells}, key=lambda a: a.value)
    best_by: dict[str, dict[Aspect, str]] = {m: {} for m in METRIC_NAMES}
    improvement: dict[str, dict[Aspect, float]] = {m: {} for m in METRIC_NAMES}
    for metric in METRIC_NAMES:
        for aspect in aspects:
            candidates = [(name, res) for (a, name), res in cells.items() if a == aspect]
            candidates.sort(key=lambda item: _model_rank(item[0]))
            best_name, best_res = max(candidates, key=lambda item: getattr(item[1].mean, metric))
            best_by[metric][aspect] = best_name
            base = baseline_map.get(aspect)
            if base is not None:
                base_value = getattr(base.mean, metric)
                if base_value > 0:
                    best_value = getattr(best_res.mean, metric)
                    improvement[metric][aspect] = (best_value - base_value) / base_value
    return ComparisonReport(cells=cells, baseline=baseline_map, best_by=best_by, improvement=improvement)


# ---------------------------------------------------------------------------
# Trainer adapters for the harness.
# ---------------------------------------------------------------------------


def svm_trainer(c: float = 1.0, ngram_range: tuple[int, int] = (1, 2), min_df: int = 2) -> Trainer:
    """TF-IDF + linear SVM trainer; the vocabulary is fitted per fold."""
    from .baseline import VocabConfig, fit_vocabulary, predict_svm, train_svm
    from .corpus import LabeledSentence

    def train(sentences, labels, *, seed: int, aspect: Aspect) -> Predictor:
        vocab = fit_vocabulary(sentences, VocabConfig(ngram_range=ngram_range, min_df=min_df))
        view = _view_from(sentences, labels, aspect)
        model = train_svm(view, vocab, c=c, seed=seed)

        def predict(test_sentences) -> list[bool]:
            return [predict_svm(model, s).decision == "positive" for s in test_sentences]

        return predict

    return train


def finetune_trainer(
    encoder_spec,
    batch_size: int,
    epochs: int,
    learning_rate: float,
    head_config=None,
) -> Trainer:
    """Transformer fine-tuning trainer around classifier.fine_tune."""
    from .classifier import TrainConfig, fine_tune, predict_aspect

    def train(sentences, labels, *, seed: int, aspect: Aspect) -> Predictor:
        view = _view_from(sentences, labels, aspect)
        cfg = TrainConfig(
            aspect=aspect,
            encoder=encoder_spec,
            batch_size=batch_size,
            epochs=epochs,
            learning_rate=learning_rate,
            seed=seed,
        )
        model = fine_tune(view, cfg, head_config=head_config)

        def predict(test_sentences) -> list[bool]:
            return [predict_aspect(model, s).decision == "positive" for s in test_sentences]

        return predict

    return train


def _view_from(sentences, labels, aspect: Aspect) -> BinaryView:
    from .corpus import LabeledSentence

    positives = []
    negatives = []
    for sentence, flag in zip(sentences, labels):
        item = LabeledSentence(
            sentence=sentence,
            aspects=frozenset({aspect if flag else _other_than(aspect)}),
        )
        (positives if flag else negatives).append(item)
    return BinaryView(target=aspect, positives=tuple(positives), negatives=tuple(negatives))


def _other_than(aspect: Aspect) -> Aspect:
    return Aspect.OTHERS if aspect is not Aspect.OTHERS else Aspect.PERFORMANCE
