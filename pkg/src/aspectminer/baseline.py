"""Shallow baseline: TF-IDF features plus a linear soft-margin SVM.

The vocabulary and TF-IDF weighting are implemented here so the feature
space is fully pinned down (lexicographic term ids, smoothed idf, L2
normalization); the hinge-loss optimization itself is delegated to
liblinear via scikit-learn.
"""

from __future__ import annotations

import json
import math
import re
import string
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import sparse

from .aspects import Aspect, parse_aspect
from .corpus import BinaryView
from .errors import TrainingError
from .preprocess import CleanSentence

_TOKEN_RE = re.compile(r"\S+")
_STRIP_CHARS = string.punctuation


@dataclass(frozen=True)
class VocabConfig:
    ngram_range: tuple[int, int] = (1, 2)
    min_df: int = 2


@dataclass(frozen=True)
class VocabularyModel:
    """Term ids (dense, lexicographic) and idf weights fitted on a corpus."""

    term_index: dict[str, int]
    idf: dict[str, float]
    config: VocabConfig

    @property
    def size(self) -> int:
        return len(self.term_index)


@dataclass(frozen=True)
class SvmBinaryClassifier:
    target: Aspect
    weights: np.ndarray
    bias: float
    vocab: VocabularyModel
    c: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if len(self.weights) != self.vocab.size:
            raise ValueError("weight vector length must equal vocabulary size")


@dataclass(frozen=True)
class SvmPrediction:
    decision: str  # "positive" | "negative"
    margin: float


def feature_tokens(text: str) -> list[str]:
    """Lowercased whitespace tokens with surrounding punctuation shaved off."""
    tokens = []
    for raw in _TOKEN_RE.findall(text.lower()):
        token = raw.strip(_STRIP_CHARS)
        if token:
            tokens.append(token)
    return tokens


def _ngrams(tokens: list[str], ngram_range: tuple[int, int]) -> list[str]:
    lo, hi = ngram_range
    grams: list[str] = []
    for n in range(lo, hi + 1):
        grams.extend(" ".join(tokens[i : i + n]) for i in range(len(tokens) - n + 1))
    return grams


def fit_vocabulary(sentences: Sequence[CleanSentence], config: VocabConfig = VocabConfig()) -> VocabularyModel:
    """Build the term index and idf table from a training corpus.

    Terms below ``min_df`` document frequency are dropped; surviving terms
    get dense ids in lexicographic order, so the fit is deterministic.
    idf(t) = ln((1 + n_docs) / (1 + df(t))) + 1.
    """
    df: dict[str, int] = {}
    n_docs = 0
    for sent in sentences:
        grams = set(_ngrams(feature_tokens(sent.text), config.ngram_range))
        if grams:
            n_docs += 1
        for gram in grams:
            df[gram] = df.get(gram, 0) + 1
    if n_docs == 0:
        raise TrainingError("cannot fit vocabulary: every sentence is empty of tokens")
    kept = sorted(term for term, count in df.items() if count >= config.min_df)
    if not kept:
        raise TrainingError(f"cannot fit vocabulary: no term reaches min_df={config.min_df}")
    term_index = {term: idx for idx, term in enumerate(kept)}
    idf = {term: math.log((1 + n_docs) / (1 + df[term])) + 1.0 for term in kept}
    return VocabularyModel(term_index=term_index, idf=idf, config=config)


def vectorize(sentence: CleanSentence, vocab: VocabularyModel) -> sparse.csr_matrix:
    """TF-IDF vector for one sentence, L2-normalized; OOV terms ignored."""
    counts: dict[int, float] = {}
    for gram in _ngrams(feature_tokens(sentence.text), vocab.config.ngram_range):
        idx = vocab.term_index.get(gram)
        if idx is not None:
            counts[idx] = counts.get(idx, 0.0) + vocab.idf[gram]
    if not counts:
        return sparse.csr_matrix((1, vocab.size))
    cols = np.fromiter(counts.keys(), dtype=np.int64)
    vals = np.fromiter(counts.values(), dtype=np.float64)
    vals /= np.linalg.norm(vals)
    return sparse.csr_matrix((vals, (np.zeros_like(cols), cols)), shape=(1, vocab.size))


def vectorize_many(sentences: Sequence[CleanSentence], vocab: VocabularyModel) -> sparse.csr_matrix:
    if not sentences:
        return sparse.csr_matrix((0, vocab.size))
    return sparse.vstack([vectorize(s, vocab) for s in sentences], format="csr")


def unnormalized_decision(model: SvmBinaryClassifier, sentence: CleanSentence) -> float:
    """Decision value on the raw (pre-normalization) TF-IDF vector.

    Unlike the normalized margin, this value is strictly monotonic in the
    addition of positively-weighted tokens.
    """
    value = model.bias
    for gram in _ngrams(feature_tokens(sentence.text), model.vocab.config.ngram_range):
        idx = model.vocab.term_index.get(gram)
        if idx is not None:
            value += model.vocab.idf[gram] * float(model.weights[idx])
    return value


def train_svm(
    view: BinaryView,
    vocab: VocabularyModel,
    c: float = 1.0,
    seed: int = 0,
) -> SvmBinaryClassifier:
    """Fit a linear SVM on a binary view.

    Hinge loss with L2 regularization, classes weighted by inverse
    frequency; deterministic for a fixed seed. A view missing either class
    cannot be trained.
    """
    from sklearn.svm import LinearSVC

    if not view.positives or not view.negatives:
        raise TrainingError(
            f"cannot train SVM for aspect {view.target.value}: "
            f"{len(view.positives)} positives / {len(view.negatives)} negatives"
        )
    sentences = [item.sentence for item in view.positives] + [item.sentence for item in view.negatives]
    y = np.array([1] * len(view.positives) + [0] * len(view.negatives))
    x = vectorize_many(sentences, vocab)
    clf = LinearSVC(C=c, class_weight="balanced", random_state=seed, max_iter=20000)
    clf.fit(x, y)
    return SvmBinaryClassifier(
        target=view.target,
        weights=np.asarray(clf.coef_[0], dtype=np.float64),
        bias=float(clf.intercept_[0]),
        vocab=vocab,
        c=c,
        seed=seed,
    )


def predict_svm(model: SvmBinaryClassifier, sentence: CleanSentence) -> SvmPrediction:
    """Sign of the margin decides; exactly zero resolves negative."""
    x = vectorize(sentence, model.vocab)
    margin = float(x.dot(model.weights)[0] + model.bias)
    return SvmPrediction(decision="positive" if margin > 0 else "negative", margin=margin)


def save_svm(model: SvmBinaryClassifier, path: str | Path) -> None:
    """Write the model as self-describing JSON; round-trips exactly."""
    terms = [""] * model.vocab.size
    for term, idx in model.vocab.term_index.items():
        terms[idx] = term
    payload = {
        "format": "aspectminer-svm-v1",
        "target": model.target.value,
        "config": {
            "ngram_range": list(model.vocab.config.ngram_range),
            "min_df": model.vocab.config.min_df,
        },
        "terms": terms,
        "idf": [model.vocab.idf[t] for t in terms],
        "weights": model.weights.tolist(),
        "bias": model.bias,
        "c": model.c,
        "seed": model.seed,
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_svm(path: str | Path) -> SvmBinaryClassifier:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format") != "aspectminer-svm-v1":
        raise TrainingError(f"{path}: not an aspectminer SVM model file")
    config = VocabConfig(
        ngram_range=tuple(payload["config"]["ngram_range"]),
        min_df=payload["config"]["min_df"],
    )
    terms = payload["terms"]
    vocab = VocabularyModel(
        term_index={term: idx for idx, term in enumerate(terms)},
        idf=dict(zip(terms, payload["idf"])),
        config=config,
    )
    return SvmBinaryClassifier(
        target=parse_aspect(payload["target"]),
        weights=np.asarray(payload["weights"], dtype=np.float64),
        bias=payload["bias"],
        vocab=vocab,
        c=payload["c"],
        seed=payload["seed"],
    )
