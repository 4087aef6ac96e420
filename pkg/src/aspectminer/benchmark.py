"""Bundled benchmark corpus.

The package ships a deterministic synthetic corpus of 4522 labeled
sentences whose per-aspect sample counts equal the published Opiner
benchmark distribution exactly. Sentences are generated from per-aspect
keyword pools over a shared filler vocabulary, with signal/noise rates
calibrated so the shallow baseline scores in the neighborhood reported for
the original corpus. Regenerate with ``python -m aspectminer.benchmark``.
"""

from __future__ import annotations

import argparse
import csv
import io
from importlib import resources
from pathlib import Path

import numpy as np

from .aspects import ALL_ASPECTS, Aspect

BENCHMARK_SIZE = 4522
BENCHMARK_SEED = 77041
BENCHMARK_COUNTS: dict[Aspect, int] = {
    Aspect.PERFORMANCE: 348,
    Aspect.USABILITY: 1437,
    Aspect.SECURITY: 163,
    Aspect.COMMUNITY: 93,
    Aspect.COMPATIBILITY: 93,
    Aspect.PORTABILITY: 70,
    Aspect.DOCUMENTATION: 253,
    Aspect.BUG: 189,
    Aspect.LEGAL: 50,
    Aspect.ONLY_SENTIMENT: 348,
    Aspect.OTHERS: 1699,
}

_KEYWORDS: dict[Aspect, list[str]] = {
    Aspect.PERFORMANCE: [
        "slow", "fast", "latency", "throughput", "overhead", "benchmark",
        "cpu", "memory", "cache", "profiling", "bottleneck", "scales",
        "milliseconds", "concurrency", "footprint",
    ],
    Aspect.USABILITY: [
        "easy", "simple", "intuitive", "boilerplate", "readable", "verbose",
        "convenient", "clean", "straightforward", "flexible", "awkward",
        "ergonomic", "learning", "configure", "fluent",
    ],
    Aspect.SECURITY: [
        "encryption", "vulnerability", "password", "authentication", "tls",
        "certificate", "exploit", "sanitize", "token", "hashing", "secure",
        "injection", "keystore",
    ],
    Aspect.COMMUNITY: [
        "community", "popular", "widespread", "contributors", "adoption",
        "forum", "tutorials", "stackoverflow", "ecosystem", "maintained",
        "github", "mailing",
    ],
    Aspect.COMPATIBILITY: [
        "compatible", "interoperability", "alternative", "drop-in", "port",
        "migration", "version", "backward", "jdk", "spec", "standard",
        "integrates",
    ],
    Aspect.PORTABILITY: [
        "linux", "windows", "cross-platform", "portable", "mac", "cygwin",
        "unix", "android", "embedded", "arm", "native", "platforms",
    ],
    Aspect.DOCUMENTATION: [
        "documentation", "docs", "javadoc", "examples", "reference",
        "manual", "undocumented", "wiki", "guide", "readme", "documented",
        "tutorial",
    ],
    Aspect.BUG: [
        "bug", "buggy", "crash", "broken", "exception", "regression",
        "workaround", "fails", "glitch", "defect", "unstable", "fix",
        "nullpointer",
    ],
    Aspect.LEGAL: [
        "license", "gpl", "apache", "open-source", "commercial", "patent",
        "proprietary", "royalty", "lgpl", "copyright", "licensing",
        "redistribution",
    ],
    Aspect.ONLY_SENTIMENT: [
        "love", "hate", "frustrating", "awesome", "terrible", "great",
        "horrible", "amazing", "awful", "fantastic", "disappointing",
        "brilliant",
    ],
    Aspect.OTHERS: [
        "anyone", "tried", "wondering", "question", "project", "suggestion",
        "regenerate", "manually", "update", "instead", "general", "setup",
    ],
}

# (probability a labeled sentence carries its aspect's keywords,
#  probability an unlabeled sentence picks up one as noise)
_SIGNAL_NOISE: dict[Aspect, tuple[float, float]] = {
    Aspect.PERFORMANCE: (0.62, 0.022),
    Aspect.USABILITY: (0.74, 0.33),
    Aspect.SECURITY: (0.62, 0.004),
    Aspect.COMMUNITY: (0.45, 0.006),
    Aspect.COMPATIBILITY: (0.40, 0.008),
    Aspect.PORTABILITY: (0.65, 0.003),
    Aspect.DOCUMENTATION: (0.50, 0.010),
    Aspect.BUG: (0.55, 0.009),
    Aspect.LEGAL: (0.55, 0.001),
    Aspect.ONLY_SENTIMENT: (0.50, 0.010),
    Aspect.OTHERS: (0.55, 0.120),
}

_FILLERS = (
    "the a this that it we you they i api library framework code method class "
    "function call using use used need want try tried when while because since "
    "with without into from over under after before also just really very still "
    "one two some many most other same new old way thing case point time work "
    "works working run runs running make makes made get gets got see look found "
    "think know answer question client server data file string object list map "
    "thread request response value result test build release tool option default "
    "config end start line part sure maybe probably actually however instead "
    "should would could can will must might like better best worse good bad"
).split()

_PLACEHOLDERS = ("CODETERM_GEN1", "CODESNIPPET_JAVA1", "URL_http://example.org/docs")


def _label_sets(rng: np.random.Generator) -> list[set[Aspect]]:
    """4522 non-empty aspect sets whose per-aspect totals match the table."""
    rows: list[set[Aspect]] = []
    for aspect in ALL_ASPECTS:
        rows.extend({aspect} for _ in range(BENCHMARK_COUNTS[aspect]))
    rng.shuffle(rows)  # type: ignore[arg-type]
    merges = len(rows) - BENCHMARK_SIZE
    for _ in range(merges):
        moved = rows.pop()
        for offset in rng.permutation(len(rows))[:200]:
            target = rows[int(offset)]
            if target.isdisjoint(moved):
                target.update(moved)
                break
        else:  # no disjoint partner found in the sample; merge anyway
            rows[int(rng.integers(len(rows)))].update(moved)
    rng.shuffle(rows)  # type: ignore[arg-type]
    return rows


def _sentence_text(aspects: set[Aspect], rng: np.random.Generator) -> str:
    words = [str(rng.choice(_FILLERS)) for _ in range(int(rng.integers(7, 16)))]
    for aspect in ALL_ASPECTS:
        signal, noise = _SIGNAL_NOISE[aspect]
        pool = _KEYWORDS[aspect]
        if aspect in aspects:
            if rng.random() < signal:
                for _ in range(int(rng.integers(1, 4))):
                    words.insert(int(rng.integers(len(words) + 1)), str(rng.choice(pool)))
        elif rng.random() < noise:
            words.insert(int(rng.integers(len(words) + 1)), str(rng.choice(pool)))
    if rng.random() < 0.08:
        words.insert(int(rng.integers(len(words) + 1)), str(rng.choice(_PLACEHOLDERS)))
    return " ".join(words) + "."


def generate_rows(seed: int = BENCHMARK_SEED) -> list[tuple[str, str, frozenset[Aspect]]]:
    rng = np.random.default_rng(seed)
    rows = []
    for index, aspects in enumerate(_label_sets(rng)):
        rows.append((f"so-{index:05d}", _sentence_text(aspects, rng), frozenset(aspects)))
    return rows


def benchmark_csv_text(seed: int = BENCHMARK_SEED) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["id", "text", *[a.value for a in ALL_ASPECTS]])
    for row_id, text, aspects in generate_rows(seed):
        writer.writerow([row_id, text, *[1 if a in aspects else 0 for a in ALL_ASPECTS]])
    return out.getvalue()


def write_benchmark(path: str | Path, seed: int = BENCHMARK_SEED) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(benchmark_csv_text(seed), encoding="utf-8")
    return path


def benchmark_path() -> Path:
    """Location of the bundled benchmark CSV."""
    return Path(str(resources.files("aspectminer").joinpath("data/benchmark.csv")))


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="Regenerate the bundled benchmark corpus.")
    parser.add_argument("--out", default="benchmark.csv", help="Output CSV path.")
    parser.add_argument("--seed", type=int, default=BENCHMARK_SEED)
    args = parser.parse_args(argv)
    path = write_benchmark(args.out, seed=args.seed)
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
