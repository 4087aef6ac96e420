from __future__ import annotations

import math

import numpy as np
import pytest
import torch

from aspectminer.aspects import Aspect
from aspectminer.classifier import (
    HYPERPARAMETER_REGISTRY,
    ClassifierHead,
    HeadConfig,
    TrainConfig,
    build_head,
    default_train_config,
    detect_aspects,
    fine_tune,
    forward,
    load_model,
    predict_aspect,
    prediction_from_logits,
    save_model,
)
from aspectminer.encoder import load_encoder, tiny_spec
from aspectminer.errors import ModelStoreError, TrainingError
from aspectminer.preprocess import CleanSentence

from conftest import make_sentence, separable_view


def test_head_parameter_count_matches_layer_sizes() -> None:
    head = build_head(HeadConfig(), seed=0)
    total = sum(p.numel() for p in head.parameters())
    assert total == 768 * 128 + 128 + 128 * 2 + 2 == 98_690


def test_head_config_validation() -> None:
    with pytest.raises(ValueError):
        HeadConfig(output_units=3)
    with pytest.raises(ValueError):
        HeadConfig(dropout_rate=1.0)
    with pytest.raises(ValueError):
        HeadConfig(init_scheme="he-normal")


def test_glorot_uniform_bounds() -> None:
    head = build_head(HeadConfig(), seed=0)
    bound = math.sqrt(6.0 / (768 + 128))
    assert bound == pytest.approx(0.0818, abs=1e-4)
    w = head.fc1.weight.detach().numpy()
    assert np.abs(w).max() <= bound
    assert np.abs(w).max() > 0.9 * bound  # actually fills the glorot range
    assert (head.fc1.bias.detach().numpy() == 0).all()


def test_head_init_seeded() -> None:
    a = build_head(HeadConfig(), seed=42)
    b = build_head(HeadConfig(), seed=42)
    c = build_head(HeadConfig(), seed=43)
    assert torch.equal(a.fc1.weight, b.fc1.weight)
    assert not torch.equal(a.fc1.weight, c.fc1.weight)


def test_forward_probabilities_sum_to_one() -> None:
    head = build_head(HeadConfig(input_dim=8, hidden_units=4), seed=1)
    rng = np.random.default_rng(0)
    for _ in range(20):
        pred = forward(head, rng.normal(size=8), "infer")
        assert sum(pred.probabilities) == pytest.approx(1.0, abs=1e-6)


def test_forward_equal_logits_gives_half_and_negative_tie() -> None:
    pred = prediction_from_logits(np.array([0.3, 0.3]))
    assert pred.probabilities == (0.5, 0.5)
    assert pred.decision == "negative"


def test_forward_matches_hand_computed_softmax() -> None:
    config = HeadConfig(input_dim=4, hidden_units=3, dropout_rate=0.0)
    head = ClassifierHead(config)
    w1 = np.array([[0.1, -0.2, 0.3, 0.4], [0.0, 0.5, -0.1, 0.2], [0.3, 0.3, 0.1, -0.4]])
    b1 = np.array([0.05, -0.1, 0.0])
    w2 = np.array([[0.2, -0.3, 0.5], [-0.1, 0.4, 0.1]])
    b2 = np.array([0.01, -0.02])
    with torch.no_grad():
        head.fc1.weight.copy_(torch.tensor(w1, dtype=torch.float32))
        head.fc1.bias.copy_(torch.tensor(b1, dtype=torch.float32))
        head.fc2.weight.copy_(torch.tensor(w2, dtype=torch.float32))
        head.fc2.bias.copy_(torch.tensor(b2, dtype=torch.float32))
    x = np.array([0.7, -0.3, 1.1, 0.25])
    hidden = np.maximum(w1 @ x + b1, 0.0)
    logits = w2 @ hidden + b2
    expected = np.exp(logits - logits.max())
    expected /= expected.sum()
    pred = forward(head, x, "infer")
    assert pred.probabilities[0] == pytest.approx(expected[0], abs=1e-6)
    assert pred.probabilities[1] == pytest.approx(expected[1], abs=1e-6)


def test_forward_rejects_non_finite_input() -> None:
    head = build_head(HeadConfig(input_dim=4, hidden_units=3), seed=0)
    with pytest.raises(ValueError):
        forward(head, np.array([1.0, np.nan, 0.0, 0.0]), "infer")
    with pytest.raises(ValueError):
        forward(head, np.ones(4), "predict")


def test_forward_train_mode_applies_dropout() -> None:
    config = HeadConfig(input_dim=4, hidden_units=64, dropout_rate=0.5)
    head = ClassifierHead(config)
    with torch.no_grad():
        head.fc1.weight.fill_(0.5)
        head.fc1.bias.fill_(0.1)
        head.fc2.weight.copy_(torch.linspace(-1, 1, 128).reshape(2, 64))
        head.fc2.bias.zero_()
    x = np.ones(4)
    torch.manual_seed(0)
    outcomes = {forward(head, x, "train").probabilities for _ in range(5)}
    assert len(outcomes) > 1
    infer = {forward(head, x, "infer").probabilities for _ in range(5)}
    assert len(infer) == 1


def test_hyperparameter_registry_rows() -> None:
    assert HYPERPARAMETER_REGISTRY[Aspect.SECURITY] == ("DistilBERT", 16, 2, 1e-5)
    assert HYPERPARAMETER_REGISTRY[Aspect.PERFORMANCE] == ("RoBERTa", 32, 3, 1e-5)
    assert HYPERPARAMETER_REGISTRY[Aspect.BUG] == ("BERT", 32, 3, 3e-5)
    assert HYPERPARAMETER_REGISTRY[Aspect.LEGAL] == ("DistilBERT", 32, 3, 1e-5)
    cfg = default_train_config(Aspect.SECURITY)
    assert cfg.encoder.checkpoint_name == "distilbert-base-uncased"
    assert (cfg.batch_size, cfg.epochs, cfg.learning_rate) == (16, 2, 1e-5)
    # aspects without a registry row use the most common configuration
    fallback = default_train_config(Aspect.OTHERS)
    assert fallback.encoder.checkpoint_name == "distilroberta-base"
    assert (fallback.batch_size, fallback.epochs, fallback.learning_rate) == (32, 3, 1e-5)


def test_fine_tune_zero_epochs_keeps_initialization(tiny8) -> None:
    view = separable_view(Aspect.BUG, "bugword", 5, 5)
    cfg = TrainConfig(aspect=Aspect.BUG, encoder=tiny8, batch_size=4, epochs=0, learning_rate=1e-3, seed=9)
    model = fine_tune(view, cfg)
    assert model.training_log == ()
    reference_encoder = load_encoder(tiny8, seed=9)
    for key, tensor in model.encoder.state_dict().items():
        assert torch.equal(tensor, reference_encoder.state_dict()[key])
    reference_head = build_head(HeadConfig(input_dim=tiny8.hidden), seed=9)
    for key, tensor in model.head.state_dict().items():
        assert torch.equal(tensor, reference_head.state_dict()[key])


def test_fine_tune_rejects_single_class(tiny8) -> None:
    view = separable_view(Aspect.BUG, "bugword", 0, 6)
    cfg = TrainConfig(aspect=Aspect.BUG, encoder=tiny8, batch_size=4, epochs=1, learning_rate=1e-3)
    with pytest.raises(TrainingError, match="Bug"):
        fine_tune(view, cfg)


def test_fine_tune_divergence_aborts(tiny8) -> None:
    view = separable_view(Aspect.BUG, "bugword", 10, 10)
    cfg = TrainConfig(aspect=Aspect.BUG, encoder=tiny8, batch_size=4, epochs=5, learning_rate=1e18, seed=0)
    with pytest.raises(TrainingError, match="diverged"):
        fine_tune(view, cfg)


def test_fine_tune_reproducible_loss_log(tiny8) -> None:
    view = separable_view(Aspect.BUG, "bugword", 12, 12, seed=2)
    cfg = TrainConfig(aspect=Aspect.BUG, encoder=tiny8, batch_size=8, epochs=2, learning_rate=1e-3, seed=5)
    first = fine_tune(view, cfg)
    second = fine_tune(view, cfg)
    assert len(first.training_log) == 2
    for a, b in zip(first.training_log, second.training_log):
        assert a == pytest.approx(b, abs=1e-6)


def test_fine_tune_updates_every_encoder_layer(tiny8) -> None:
    view = separable_view(Aspect.BUG, "bugword", 8, 8, seed=6)
    cfg = TrainConfig(aspect=Aspect.BUG, encoder=tiny8, batch_size=16, epochs=1, learning_rate=1e-3, seed=4)
    model = fine_tune(view, cfg)
    reference = load_encoder(tiny8, seed=4).state_dict()
    trained = model.encoder.state_dict()
    groups: dict[str, bool] = {}
    for key in reference:
        group = key.split(".")[0] if not key.startswith("layers.") else ".".join(key.split(".")[:2])
        groups[group] = groups.get(group, False) or not torch.equal(reference[key], trained[key])
    assert groups.pop("tok_emb")
    assert groups.pop("pos_emb")
    assert len(groups) == tiny8.layers
    assert all(groups.values()), f"some layers never changed: {groups}"


def test_fine_tune_does_not_mutate_passed_encoder(tiny8) -> None:
    view = separable_view(Aspect.BUG, "bugword", 6, 6)
    encoder = load_encoder(tiny8, seed=3)
    snapshot = {k: v.clone() for k, v in encoder.state_dict().items()}
    cfg = TrainConfig(aspect=Aspect.BUG, encoder=tiny8, batch_size=4, epochs=1, learning_rate=1e-2, seed=3)
    fine_tune(view, cfg, encoder=encoder)
    for key, tensor in encoder.state_dict().items():
        assert torch.equal(tensor, snapshot[key])


def test_predict_aspect_deterministic(tiny8) -> None:
    view = separable_view(Aspect.BUG, "bugword", 8, 8)
    cfg = TrainConfig(aspect=Aspect.BUG, encoder=tiny8, batch_size=8, epochs=1, learning_rate=1e-3, seed=0)
    model = fine_tune(view, cfg)
    sentence = CleanSentence("the bugword api call")
    assert predict_aspect(model, sentence) == predict_aspect(model, sentence)
    placeholder_only = CleanSentence("CODESNIPPET_GEN1")
    pred = predict_aspect(model, placeholder_only)
    assert sum(pred.probabilities) == pytest.approx(1.0, abs=1e-6)


def _train_marker_model(aspect: Aspect, marker: str, seed: int):
    spec = tiny_spec(hidden=16, layers=1, heads=2)
    view = separable_view(aspect, marker, 30, 30, seed=seed)
    cfg = TrainConfig(aspect=aspect, encoder=spec, batch_size=16, epochs=4, learning_rate=1e-2, seed=seed)
    return fine_tune(view, cfg)


def test_detect_aspects_with_constructed_models() -> None:
    bug_model = _train_marker_model(Aspect.BUG, "bugword", seed=1)
    perf_model = _train_marker_model(Aspect.PERFORMANCE, "quicksort", seed=2)
    models = {Aspect.BUG: bug_model, Aspect.PERFORMANCE: perf_model}
    rng = np.random.default_rng(10)
    both = CleanSentence(make_sentence(rng, "bugword").text + " quicksort")
    detection = detect_aspects(models, both)
    assert detection.aspects == frozenset({Aspect.BUG, Aspect.PERFORMANCE})
    neither = make_sentence(rng)
    detection = detect_aspects(models, neither)
    assert detection.aspects == frozenset()
    assert set(detection.probabilities) == {Aspect.BUG, Aspect.PERFORMANCE}


def test_detect_aspects_requires_models() -> None:
    with pytest.raises(ValueError):
        detect_aspects({}, CleanSentence("x"))


def test_model_roundtrip_and_hash_verification(tmp_path, tiny8) -> None:
    view = separable_view(Aspect.LEGAL, "license", 8, 8)
    cfg = TrainConfig(aspect=Aspect.LEGAL, encoder=tiny8, batch_size=8, epochs=1, learning_rate=1e-3, seed=2)
    model = fine_tune(view, cfg)
    save_model(model, tmp_path / "legal")
    loaded = load_model(tmp_path / "legal")
    assert loaded.config == model.config
    assert loaded.training_log == model.training_log
    probe = CleanSentence("license terms for the api")
    assert predict_aspect(loaded, probe) == predict_aspect(model, probe)
    # corrupting any stored file must be caught by the manifest hashes
    (tmp_path / "legal" / "head.pt").write_bytes(b"garbage")
    with pytest.raises(ModelStoreError, match="Legal"):
        load_model(tmp_path / "legal")
