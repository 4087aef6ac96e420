"""Acceptance suite: one test per release criterion, each printing a
pass line (run with ``pytest tests/test_acceptance.py -v -s``)."""

from __future__ import annotations

import json
import os
import re
from pathlib import Path

import numpy as np
import pytest
import torch

from aspectminer.aspects import Aspect
from aspectminer.benchmark import BENCHMARK_COUNTS, benchmark_path
from aspectminer.classifier import HeadConfig, TrainConfig, build_head, fine_tune, forward, predict_aspect
from aspectminer.cli import main
from aspectminer.corpus import BinaryView, dataset_stats
from aspectminer.encoder import MAX_LEN, TokenEmbeddings, embed, load_encoder, masked_max, max_pool, tiny_spec, tokenize
from aspectminer.evaluation import confusion, cross_validate, kfold_split, precision_recall_f1, svm_trainer
from aspectminer.report import report_from_json

from conftest import separable_view, write_toy_csv

EXPECTED_TABLE_COUNTS = {
    "Performance": 348,
    "Usability": 1437,
    "Security": 163,
    "Community": 93,
    "Compatibility": 93,
    "Portability": 70,
    "Documentation": 253,
    "Bug": 189,
    "Legal": 50,
    "OnlySentiment": 348,
    "Others": 1699,
}


def test_c01_dataset_fidelity(benchmark_dataset, capsys) -> None:
    assert main(["stats", "--dataset", str(benchmark_path())]) == 0
    out = capsys.readouterr().out
    assert "(4522 sentences)" in out
    for aspect, count in EXPECTED_TABLE_COUNTS.items():
        assert re.search(rf"{aspect}\s+{count}\s", out), f"stats row mismatch for {aspect}"
    dist = dataset_stats(benchmark_dataset)
    assert dist.total == 4522
    assert {a.value: c for a, c in dist.counts.items()} == EXPECTED_TABLE_COUNTS
    assert BENCHMARK_COUNTS == {Aspect((name)): count for name, count in EXPECTED_TABLE_COUNTS.items()}
    print("[criterion 1] PASS: benchmark stats report 4522 sentences with the published per-aspect counts")


def test_c02_metric_oracle_equivalence() -> None:
    rng = np.random.default_rng(123)
    for _ in range(1000):
        n = int(rng.integers(0, 201))
        preds = [bool(rng.integers(2)) for _ in range(n)]
        gold = [bool(rng.integers(2)) for _ in range(n)]
        counts = confusion(preds, gold)
        tp = fp = fn = tn = 0
        for p, g in zip(preds, gold):
            tp += p and g
            fp += p and not g
            fn += (not p) and g
            tn += (not p) and (not g)
        assert (counts.tp, counts.fp, counts.fn, counts.tn) == (tp, fp, fn, tn)
        metrics = precision_recall_f1(counts)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        assert abs(metrics.precision - precision) <= 1e-12
        assert abs(metrics.recall - recall) <= 1e-12
        assert abs(metrics.f1 - f1) <= 1e-12
    print("[criterion 2] PASS: confusion + P/R/F1 match the brute-force recount to 1e-12 on 1000 random pairs")


def test_c03_fold_invariants() -> None:
    rng = np.random.default_rng(321)
    checked = 0
    while checked < 100:
        n = int(rng.integers(10, 600))
        k = int(rng.integers(2, min(11, n + 1)))
        seed = int(rng.integers(10_000))
        labels = [bool(rng.random() < rng.uniform(0.02, 0.6)) for _ in range(n)]
        positives = sum(labels)
        if 0 < positives < k:
            continue  # the fallback path warns; covered by unit tests
        splits = kfold_split(n, k, seed=seed, labels=labels)
        seen = sorted(i for s in splits for i in s.test_indices)
        assert seen == list(range(n)), "folds must partition the dataset"
        sizes = [len(s.test_indices) for s in splits]
        assert max(sizes) - min(sizes) <= 1
        if positives >= k:
            per_fold = [sum(labels[i] for i in s.test_indices) for s in splits]
            assert max(per_fold) - min(per_fold) <= 1
        assert splits == kfold_split(n, k, seed=seed, labels=labels)
        checked += 1
    print("[criterion 3] PASS: 100 random splits are exhaustive, balanced, stratified, and seed-reproducible")


def test_c04_pipeline_shape_contract() -> None:
    spec = tiny_spec(hidden=768, layers=2, heads=4)
    encoder = load_encoder(spec, seed=0)
    rng = np.random.default_rng(99)
    alphabet = list("abcdefghijklmnopqrstuvwxyz0123456789")
    for i in range(500):
        n_words = int(rng.integers(0, 1001))
        words = [
            "".join(rng.choice(alphabet, size=int(rng.integers(1, 9))))
            for _ in range(min(n_words, 40))  # 40 words already exceed 100 wordpieces
        ]
        text = " ".join(words) if n_words else ""
        seq = tokenize(text, spec)
        assert len(seq.ids) == MAX_LEN
        emb = embed(seq, encoder)
        assert emb.matrix.shape == (MAX_LEN, 768)
        assert np.isfinite(emb.matrix).all()
        pooled = max_pool(emb)
        assert pooled.values.shape == (768,)
        assert np.isfinite(pooled.values).all()
        # perturbing padded rows never changes the pooled vector
        if seq.real_tokens < MAX_LEN:
            noisy = emb.matrix.copy()
            noisy[seq.real_tokens :] += rng.normal(scale=100.0, size=noisy[seq.real_tokens :].shape).astype(np.float32)
            pooled_noisy = max_pool(TokenEmbeddings(matrix=noisy, mask=emb.mask))
            assert (pooled_noisy.values == pooled.values).all()
    print("[criterion 4] PASS: 500 random strings keep the 100 x 768 -> 768 shape contract with pad-invariant pooling")


def test_c05_gradient_check() -> None:
    spec = tiny_spec(hidden=8, layers=1, heads=2)
    rng = np.random.default_rng(7)
    worst = 0.0
    for instance in range(20):
        encoder = load_encoder(spec, seed=200 + instance)
        texts = [" ".join(rng.choice(list("abcdef"), size=5)) for _ in range(3)]
        seqs = [tokenize(t, spec) for t in texts]
        ids = torch.from_numpy(np.stack([s.ids for s in seqs]))
        mask = torch.from_numpy(np.stack([s.mask for s in seqs]))
        encoder.eval()
        with torch.no_grad():
            pooled = masked_max(encoder(ids, mask), mask).double()
        labels = torch.tensor([1, 0, int(rng.integers(2))])
        head = build_head(HeadConfig(input_dim=8, hidden_units=6), seed=instance).double()
        head.eval()  # dropout off: the loss must be deterministic for FD

        def loss_value() -> float:
            with torch.no_grad():
                return float(torch.nn.functional.cross_entropy(head(pooled), labels))

        loss = torch.nn.functional.cross_entropy(head(pooled), labels)
        head.zero_grad()
        loss.backward()
        step = 1e-6
        for param in head.parameters():
            grad = param.grad.detach().clone().reshape(-1)
            flat = param.data.reshape(-1)
            for idx in range(flat.numel()):
                original = flat[idx].item()
                flat[idx] = original + step
                up = loss_value()
                flat[idx] = original - step
                down = loss_value()
                flat[idx] = original
                fd = (up - down) / (2 * step)
                rel = abs(grad[idx].item() - fd) / max(abs(grad[idx].item()), abs(fd), 1e-8)
                worst = max(worst, rel)
                assert rel <= 1e-4, f"instance {instance}: relative gradient error {rel}"
    print(f"[criterion 5] PASS: analytic head gradients match central differences (worst rel err {worst:.2e})")


def _learnability_run(seed: int):
    # the marker uses characters absent from the filler vocabulary, so the
    # view is genuinely separable for a character-level test encoder
    view = separable_view(Aspect.BUG, "zqxzq", n_pos=100, n_neg=100, seed=42)
    items = list(view.positives) + list(view.negatives)
    labels = [True] * 100 + [False] * 100
    rng = np.random.default_rng(7)
    order = rng.permutation(200)
    held_idx = set(order[:40].tolist())  # 20% held out
    train_pos = tuple(items[i] for i in range(200) if i not in held_idx and labels[i])
    train_neg = tuple(items[i] for i in range(200) if i not in held_idx and not labels[i])
    train_view = BinaryView(target=Aspect.BUG, positives=train_pos, negatives=train_neg)
    spec = tiny_spec(hidden=16, layers=1, heads=2)
    cfg = TrainConfig(aspect=Aspect.BUG, encoder=spec, batch_size=8, epochs=3, learning_rate=1e-2, seed=seed)
    model = fine_tune(train_view, cfg)
    held = [(items[i], labels[i]) for i in sorted(held_idx)]
    preds = [predict_aspect(model, item.sentence).decision == "positive" for item, _ in held]
    metrics = precision_recall_f1(confusion(preds, [flag for _, flag in held]))
    return model, metrics


def test_c06_learnability_smoke() -> None:
    model_a, metrics = _learnability_run(seed=5)
    assert metrics.f1 >= 0.95, f"held-out F1 {metrics.f1} below 0.95"
    model_b, _ = _learnability_run(seed=5)
    assert len(model_a.training_log) == 3
    for left, right in zip(model_a.training_log, model_b.training_log):
        assert abs(left - right) <= 1e-6
    print(f"[criterion 6] PASS: separable view reaches held-out F1 {metrics.f1:.3f} in 3 epochs, reproducibly")


def test_c07_svm_baseline_soft_reproduction(benchmark_dataset) -> None:
    trainer = svm_trainer()
    performance = cross_validate(benchmark_dataset, Aspect.PERFORMANCE, trainer, k=10, seed=0, model_name="SVM")
    assert abs(performance.mean.f1 - 0.56) <= 0.15, f"Performance F1 {performance.mean.f1}"
    usability = cross_validate(benchmark_dataset, Aspect.USABILITY, trainer, k=10, seed=0, model_name="SVM")
    assert abs(usability.mean.f1 - 0.62) <= 0.15, f"Usability F1 {usability.mean.f1}"
    print(
        "[criterion 7] PASS: SVM 10-fold F1 "
        f"Performance={performance.mean.f1:.3f} (target 0.56 +/- 0.15), "
        f"Usability={usability.mean.f1:.3f} (target 0.62 +/- 0.15)"
    )


RUN_FULL = os.environ.get("ASPECTMINER_RUN_FULL_FINETUNE") == "1"


@pytest.mark.skipif(not RUN_FULL, reason="hardware-gated: set ASPECTMINER_RUN_FULL_FINETUNE=1 with a GPU and cached checkpoints")
def test_c08_transformer_soft_reproduction(benchmark_dataset) -> None:
    from aspectminer.encoder import ENCODER_REGISTRY
    from aspectminer.evaluation import finetune_trainer

    spec = ENCODER_REGISTRY["RoBERTa"]
    trainer = finetune_trainer(spec, batch_size=32, epochs=3, learning_rate=1e-5)
    result = cross_validate(benchmark_dataset, Aspect.PERFORMANCE, trainer, k=10, seed=0, model_name="RoBERTa")
    assert 0.67 <= result.mean.f1 <= 0.87, f"Performance F1 {result.mean.f1}"
    svm = cross_validate(benchmark_dataset, Aspect.PERFORMANCE, svm_trainer(), k=10, seed=0, model_name="SVM")
    assert result.mean.f1 > svm.mean.f1, "fine-tuned encoder must beat the local SVM baseline"
    print(f"[criterion 8] PASS: RoBERTa 10-fold F1 {result.mean.f1:.3f} in [0.67, 0.87], above SVM {svm.mean.f1:.3f}")


def test_c09_report_shape(tmp_path, capsys) -> None:
    write_toy_csv(tmp_path / "toy.csv", n=40, seed=3)
    config = {
        "dataset": str(tmp_path / "toy.csv"),
        "aspects": ["Performance", "Usability"],
        "models": ["SVM", "RoBERTa", "DistilBERT"],
        "k": 2,
        "seed": 0,
        "encoder_profile": "tiny",
        "tiny": {"hidden": 8, "layers": 1, "heads": 2},
        "svm": {"min_df": 1},
        "overrides": {
            aspect: {
                model: {"epochs": 1, "batch_size": 8, "learning_rate": 0.005}
                for model in ("RoBERTa", "DistilBERT")
            }
            for aspect in ("Performance", "Usability")
        },
    }
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(config), encoding="utf-8")
    outdir = tmp_path / "run"
    assert main(["evaluate", "--config", str(config_path), "--out", str(outdir)]) == 0
    capsys.readouterr()
    text = (outdir / "report.json").read_text()
    report = report_from_json(text)
    aspects = {Aspect.PERFORMANCE, Aspect.USABILITY}
    assert set(report.cells) == {(a, m) for a in aspects for m in ("RoBERTa", "DistilBERT")}
    assert set(report.baseline) == aspects
    assert set(report.best_by) == {"precision", "recall", "f1"}
    for metric_map in report.best_by.values():
        assert set(metric_map) == aspects
    # lossless round-trip
    from aspectminer.report import render_report

    assert report_from_json(render_report(report, "json")) == report
    assert render_report(report_from_json(text), "json") == text
    print("[criterion 9] PASS: toy evaluation emits a 2x2 cell grid, baseline column, best-by tables, and a lossless JSON report")


def test_c10_softmax_threshold_invariants() -> None:
    head = build_head(HeadConfig(input_dim=16, hidden_units=8), seed=3)
    rng = np.random.default_rng(17)
    for _ in range(10_000):
        pred = forward(head, rng.normal(scale=3.0, size=16), "infer")
        p_neg, p_pos = pred.probabilities
        assert abs(p_neg + p_pos - 1.0) <= 1e-6
        assert 0.0 <= p_neg <= 1.0 and 0.0 <= p_pos <= 1.0
        expected = "positive" if p_pos > 0.5 else "negative"
        assert pred.decision == expected
    # exact tie resolves negative
    from aspectminer.classifier import prediction_from_logits

    tie = prediction_from_logits(np.array([1.25, 1.25]))
    assert tie.probabilities == (0.5, 0.5) and tie.decision == "negative"
    zero_head = build_head(HeadConfig(input_dim=4, hidden_units=2), seed=0)
    with torch.no_grad():
        for param in zero_head.parameters():
            param.zero_()
    assert forward(zero_head, np.ones(4), "infer").decision == "negative"
    print("[criterion 10] PASS: 10,000 forward passes keep softmax validity with argmax decisions and negative ties")
