from __future__ import annotations

import numpy as np
import pytest

from aspectminer.aspects import ALL_ASPECTS, Aspect
from aspectminer.corpus import BinaryView, Dataset, LabeledSentence, load_dataset
from aspectminer.benchmark import benchmark_path
from aspectminer.encoder import tiny_spec
from aspectminer.preprocess import CleanSentence

FILLERS = (
    "the api call works with data and file test code thread value result "
    "method class using need want when because still just really"
).split()


def make_sentence(rng: np.random.Generator, marker: str | None = None, length: int = 7) -> CleanSentence:
    words = [str(rng.choice(FILLERS)) for _ in range(length)]
    if marker:
        words.insert(int(rng.integers(len(words) + 1)), marker)
    return CleanSentence(" ".join(words))


def separable_view(
    aspect: Aspect,
    marker: str,
    n_pos: int,
    n_neg: int,
    seed: int = 0,
) -> BinaryView:
    """Toy view whose positives all contain a marker word."""
    rng = np.random.default_rng(seed)
    other = Aspect.OTHERS if aspect is not Aspect.OTHERS else Aspect.BUG
    positives = tuple(
        LabeledSentence(make_sentence(rng, marker), frozenset({aspect})) for _ in range(n_pos)
    )
    negatives = tuple(
        LabeledSentence(make_sentence(rng), frozenset({other})) for _ in range(n_neg)
    )
    return BinaryView(target=aspect, positives=positives, negatives=negatives)


def toy_dataset(n: int = 30, seed: int = 1) -> Dataset:
    """Alternating Performance/Usability items with distinct marker words."""
    rng = np.random.default_rng(seed)
    items = []
    for i in range(n):
        if i % 2 == 0:
            items.append(LabeledSentence(make_sentence(rng, "quicksort"), frozenset({Aspect.PERFORMANCE})))
        else:
            items.append(LabeledSentence(make_sentence(rng, "ergonomic"), frozenset({Aspect.USABILITY})))
    return Dataset(items=tuple(items), name="toy")


def write_toy_csv(path, n: int = 30, seed: int = 1) -> None:
    import csv

    ds = toy_dataset(n=n, seed=seed)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "text", *[a.value for a in ALL_ASPECTS]])
        for i, item in enumerate(ds.items):
            writer.writerow(
                [f"t{i}", item.sentence.text, *[1 if a in item.aspects else 0 for a in ALL_ASPECTS]]
            )


@pytest.fixture(scope="session")
def tiny8():
    return tiny_spec(hidden=8, layers=2, heads=2)


@pytest.fixture(scope="session")
def benchmark_dataset() -> Dataset:
    return load_dataset(benchmark_path(), "opiner-csv")
