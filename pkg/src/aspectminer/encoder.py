"""Pretrained-encoder abstraction: tokenize to 100 positions, embed each
position, max-pool over real tokens.

Four published checkpoint families are supported through the transformers
library; in addition, a small self-contained encoder family (``Mini``) with
a character-level wordpiece vocabulary exists so pipelines can run without
any downloaded assets. Published summaries of these architectures sometimes
transpose the heads/hidden columns; the registry below follows the actual
checkpoint configurations (12 heads, 768 hidden for all four).
"""

from __future__ import annotations

import functools
import json
import math
import os
import string
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .errors import ConfigurationError, EncoderLoadError, PoolingError
from .preprocess import CleanSentence

MAX_LEN = 100
MODEL_FAMILIES = ("RoBERTa", "BERT", "XLNet", "DistilBERT")
MINI_FAMILY = "Mini"
CACHE_ENV_VAR = "ASPECTMINER_MODEL_CACHE"


@dataclass(frozen=True)
class EncoderSpec:
    family: str
    checkpoint_name: str
    layers: int
    heads: int
    hidden: int
    parameter_count: int


ENCODER_REGISTRY: dict[str, EncoderSpec] = {
    "RoBERTa": EncoderSpec("RoBERTa", "distilroberta-base", 6, 12, 768, 82_000_000),
    "BERT": EncoderSpec("BERT", "bert-base-uncased", 12, 12, 768, 110_000_000),
    "XLNet": EncoderSpec("XLNet", "xlnet-base-cased", 12, 12, 768, 110_000_000),
    "DistilBERT": EncoderSpec("DistilBERT", "distilbert-base-uncased", 6, 12, 768, 66_000_000),
}


def registry_spec(family: str) -> EncoderSpec:
    try:
        return ENCODER_REGISTRY[family]
    except KeyError:
        raise ConfigurationError(
            f"unknown encoder family {family!r}; registry holds {sorted(ENCODER_REGISTRY)}"
        ) from None


@dataclass
class TokenSequence:
    """Fixed-length token ids with a contiguous-prefix attention mask."""

    ids: np.ndarray
    mask: np.ndarray
    truncated: bool = False

    def __post_init__(self) -> None:
        self.ids = np.asarray(self.ids, dtype=np.int64)
        self.mask = np.asarray(self.mask, dtype=np.int64)
        if self.ids.shape != (MAX_LEN,) or self.mask.shape != (MAX_LEN,):
            raise ValueError(f"TokenSequence arrays must have length {MAX_LEN}")
        if np.any(np.diff(self.mask) > 0):
            raise ValueError("mask must be a contiguous prefix of ones")

    @property
    def real_tokens(self) -> int:
        return int(self.mask.sum())


@dataclass
class TokenEmbeddings:
    """Per-position hidden states (MAX_LEN x hidden) plus the token mask."""

    matrix: np.ndarray
    mask: np.ndarray

    def __post_init__(self) -> None:
        self.matrix = np.asarray(self.matrix, dtype=np.float32)
        self.mask = np.asarray(self.mask, dtype=np.int64)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != MAX_LEN:
            raise ValueError(f"embedding matrix must be {MAX_LEN} x hidden")
        if self.mask.shape != (MAX_LEN,):
            raise ValueError(f"mask must have length {MAX_LEN}")


@dataclass
class PooledVector:
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float32)
        if self.values.ndim != 1:
            raise ValueError("pooled vector must be one-dimensional")


# ---------------------------------------------------------------------------
# Mini family: character wordpiece + small transformer, no external assets.
# ---------------------------------------------------------------------------

_MINI_CHARS = string.ascii_lowercase + string.digits + string.punctuation
MINI_PAD, MINI_UNK, MINI_CLS, MINI_SEP = 0, 1, 2, 3
MINI_VOCAB: dict[str, int] = {"[PAD]": 0, "[UNK]": 1, "[CLS]": 2, "[SEP]": 3}
for _ch in _MINI_CHARS:
    MINI_VOCAB[_ch] = len(MINI_VOCAB)
for _ch in _MINI_CHARS:
    MINI_VOCAB["##" + _ch] = len(MINI_VOCAB)
MINI_VOCAB_SIZE = len(MINI_VOCAB)


def mini_wordpieces(text: str) -> list[str]:
    """Greedy character-level wordpiece split of lowercased text."""
    pieces: list[str] = []
    for word in text.lower().split():
        for pos, ch in enumerate(word):
            piece = ch if pos == 0 else "##" + ch
            pieces.append(piece if piece in MINI_VOCAB else "[UNK]")
    return pieces


def mini_encode(text: str) -> TokenSequence:
    pieces = mini_wordpieces(text)
    truncated = len(pieces) > MAX_LEN - 2
    body = [MINI_VOCAB[p] for p in pieces[: MAX_LEN - 2]]
    ids = [MINI_CLS] + body + [MINI_SEP]
    mask = [1] * len(ids)
    ids += [MINI_PAD] * (MAX_LEN - len(ids))
    mask += [0] * (MAX_LEN - len(mask))
    return TokenSequence(ids=np.array(ids), mask=np.array(mask), truncated=truncated)


def tiny_spec(hidden: int = 8, layers: int = 2, heads: int = 2) -> EncoderSpec:
    """Spec for a randomly-initialized Mini encoder of the given shape."""
    if hidden % heads != 0:
        raise ConfigurationError(f"hidden={hidden} must be divisible by heads={heads}")
    params = _mini_parameter_count(hidden, layers)
    return EncoderSpec(
        family=MINI_FAMILY,
        checkpoint_name=f"mini-{layers}l-{hidden}h-{heads}a",
        layers=layers,
        heads=heads,
        hidden=hidden,
        parameter_count=params,
    )


def _mini_parameter_count(hidden: int, layers: int) -> int:
    ffn = 2 * hidden
    per_layer = 4 * (hidden * hidden + hidden) + (hidden * ffn + ffn) + (ffn * hidden + hidden) + 4 * hidden
    return MINI_VOCAB_SIZE * hidden + MAX_LEN * hidden + layers * per_layer


class MiniLayer(nn.Module):
    """Post-norm transformer block: self-attention then a GELU feed-forward."""

    def __init__(self, hidden: int, heads: int) -> None:
        super().__init__()
        self.heads = heads
        self.head_dim = hidden // heads
        self.q = nn.Linear(hidden, hidden)
        self.k = nn.Linear(hidden, hidden)
        self.v = nn.Linear(hidden, hidden)
        self.o = nn.Linear(hidden, hidden)
        self.ff1 = nn.Linear(hidden, 2 * hidden)
        self.ff2 = nn.Linear(2 * hidden, hidden)
        self.ln1 = nn.LayerNorm(hidden)
        self.ln2 = nn.LayerNorm(hidden)

    def forward(self, x: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        batch, seq, hidden = x.shape
        shape = (batch, seq, self.heads, self.head_dim)
        q = self.q(x).view(shape).transpose(1, 2)
        k = self.k(x).view(shape).transpose(1, 2)
        v = self.v(x).view(shape).transpose(1, 2)
        scores = q @ k.transpose(-1, -2) / math.sqrt(self.head_dim)
        # padded keys get a large negative score so they never win attention
        scores = scores + (1.0 - mask[:, None, None, :].to(x.dtype)) * -1e9
        attended = torch.softmax(scores, dim=-1) @ v
        attended = attended.transpose(1, 2).reshape(batch, seq, hidden)
        x = self.ln1(x + self.o(attended))
        x = self.ln2(x + self.ff2(nn.functional.gelu(self.ff1(x))))
        return x


class MiniEncoder(nn.Module):
    """Small trainable encoder over the built-in character vocabulary."""

    def __init__(self, spec: EncoderSpec, seed: int = 0) -> None:
        super().__init__()
        if spec.family != MINI_FAMILY:
            raise ConfigurationError(f"MiniEncoder requires a Mini spec, got {spec.family}")
        self.spec = spec
        self.seed = seed
        self.tok_emb = nn.Embedding(MINI_VOCAB_SIZE, spec.hidden)
        self.pos_emb = nn.Embedding(MAX_LEN, spec.hidden)
        self.layers = nn.ModuleList(MiniLayer(spec.hidden, spec.heads) for _ in range(spec.layers))
        self._init_weights(seed)

    def _init_weights(self, seed: int) -> None:
        gen = torch.Generator().manual_seed(seed)
        with torch.no_grad():
            for module in self.modules():
                if isinstance(module, nn.Embedding):
                    module.weight.normal_(0.0, 0.02, generator=gen)
                elif isinstance(module, nn.Linear):
                    bound = math.sqrt(6.0 / (module.in_features + module.out_features))
                    module.weight.uniform_(-bound, bound, generator=gen)
                    module.bias.zero_()
                elif isinstance(module, nn.LayerNorm):
                    module.weight.fill_(1.0)
                    module.bias.zero_()

    def forward(self, ids: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        positions = torch.arange(ids.shape[1], device=ids.device).unsqueeze(0)
        x = self.tok_emb(ids) + self.pos_emb(positions)
        for layer in self.layers:
            x = layer(x, mask)
        return x


class HFEncoder(nn.Module):
    """Wrapper over a transformers model exposing final hidden states."""

    def __init__(self, model, spec: EncoderSpec) -> None:
        super().__init__()
        self.model = model
        self.spec = spec

    def forward(self, ids: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        return self.model(input_ids=ids, attention_mask=mask).last_hidden_state


def _resolve_cache_dir() -> str | None:
    return os.environ.get(CACHE_ENV_VAR) or None


@functools.lru_cache(maxsize=8)
def _hf_tokenizer(checkpoint_name: str):
    from transformers import AutoTokenizer

    try:
        tokenizer = AutoTokenizer.from_pretrained(checkpoint_name, cache_dir=_resolve_cache_dir())
    except Exception as exc:
        raise EncoderLoadError(
            f"vocabulary for {checkpoint_name!r} is not available: {exc}. "
            f"Download the checkpoint into ${CACHE_ENV_VAR} or pass a local directory."
        ) from exc
    tokenizer.padding_side = "right"
    tokenizer.truncation_side = "right"
    return tokenizer


def tokenize(text: CleanSentence | str, spec: EncoderSpec) -> TokenSequence:
    """Wordpiece-tokenize with the spec's native vocabulary.

    Output always has exactly MAX_LEN positions: special start/end tokens,
    zero padding on the right, truncation (flagged) beyond MAX_LEN.
    """
    raw = text.text if isinstance(text, CleanSentence) else text
    if spec.family == MINI_FAMILY:
        return mini_encode(raw)
    tokenizer = _hf_tokenizer(spec.checkpoint_name)
    full_ids = tokenizer(raw, truncation=False)["input_ids"]
    enc = tokenizer(raw, truncation=True, padding="max_length", max_length=MAX_LEN)
    return TokenSequence(
        ids=np.array(enc["input_ids"]),
        mask=np.array(enc["attention_mask"]),
        truncated=len(full_ids) > MAX_LEN,
    )


def load_encoder(spec: EncoderSpec, source: str | Path | None = None, seed: int = 0) -> nn.Module:
    """Build or load an encoder instance matching the spec.

    ``source`` may be a directory produced by ``save_encoder`` (any family)
    or, for published families, a local checkpoint directory. Without a
    source, Mini encoders are freshly initialized from the seed and
    published ones are resolved through the transformers cache. All weights
    are left trainable.
    """
    if source is not None:
        source = Path(source)
        marker = source / "aspectminer_encoder.json"
        if marker.exists():
            return _load_saved_encoder(source, spec)
        if spec.family == MINI_FAMILY:
            raise EncoderLoadError(f"{source} is not a saved Mini encoder directory")
        return _load_hf_encoder(spec, str(source))
    if spec.family == MINI_FAMILY:
        return MiniEncoder(spec, seed=seed)
    return _load_hf_encoder(spec, spec.checkpoint_name)


def _load_hf_encoder(spec: EncoderSpec, location: str) -> HFEncoder:
    from transformers import AutoModel

    try:
        model = AutoModel.from_pretrained(location, cache_dir=_resolve_cache_dir())
    except Exception as exc:
        raise EncoderLoadError(
            f"checkpoint {location!r} could not be loaded: {exc}. "
            f"Download it into ${CACHE_ENV_VAR} or pass a local checkpoint directory."
        ) from exc
    config = model.config
    layers = getattr(config, "num_hidden_layers", None) or getattr(config, "n_layers", None) or getattr(config, "n_layer", None)
    hidden = getattr(config, "hidden_size", None) or getattr(config, "dim", None) or getattr(config, "d_model", None)
    if layers != spec.layers or hidden != spec.hidden:
        raise ConfigurationError(
            f"checkpoint {location!r} reports layers={layers}, hidden={hidden}; "
            f"spec {spec.family} expects layers={spec.layers}, hidden={spec.hidden}"
        )
    return HFEncoder(model, spec)


def save_encoder(encoder: nn.Module, directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    spec = encoder.spec
    meta = {
        "type": "mini" if isinstance(encoder, MiniEncoder) else "hf",
        "spec": spec.__dict__,
        "seed": getattr(encoder, "seed", 0),
    }
    (directory / "aspectminer_encoder.json").write_text(json.dumps(meta, indent=2), encoding="utf-8")
    if isinstance(encoder, MiniEncoder):
        torch.save(encoder.state_dict(), directory / "weights.pt")
    else:
        encoder.model.save_pretrained(directory / "hf")


def _load_saved_encoder(directory: Path, spec: EncoderSpec | None = None) -> nn.Module:
    meta = json.loads((directory / "aspectminer_encoder.json").read_text(encoding="utf-8"))
    saved_spec = EncoderSpec(**meta["spec"])
    if spec is not None and saved_spec != spec:
        raise ConfigurationError(f"saved encoder spec {saved_spec} does not match requested {spec}")
    if meta["type"] == "mini":
        encoder = MiniEncoder(saved_spec, seed=meta.get("seed", 0))
        encoder.load_state_dict(torch.load(directory / "weights.pt", weights_only=True))
        return encoder
    return _load_hf_encoder(saved_spec, str(directory / "hf"))


def load_saved_encoder(directory: str | Path) -> nn.Module:
    """Load an encoder from a ``save_encoder`` directory, spec taken from disk."""
    return _load_saved_encoder(Path(directory))


def embed(tokens: TokenSequence, encoder: nn.Module, spec: EncoderSpec | None = None) -> TokenEmbeddings:
    """Final-layer hidden states for one token sequence (inference mode)."""
    if spec is not None and spec != encoder.spec:
        raise ConfigurationError(f"encoder carries spec {encoder.spec}, requested {spec}")
    encoder.eval()
    with torch.no_grad():
        ids = torch.from_numpy(tokens.ids).unsqueeze(0)
        mask = torch.from_numpy(tokens.mask).unsqueeze(0)
        hidden = encoder(ids, mask)[0]
    return TokenEmbeddings(matrix=hidden.numpy().astype(np.float32), mask=tokens.mask.copy())


def embed_batch(sequences: list[TokenSequence], encoder: nn.Module, batch_size: int = 32) -> np.ndarray:
    """Hidden states for many sequences, stacked (N x MAX_LEN x hidden)."""
    encoder.eval()
    chunks = []
    with torch.no_grad():
        for start in range(0, len(sequences), batch_size):
            batch = sequences[start : start + batch_size]
            ids = torch.from_numpy(np.stack([s.ids for s in batch]))
            mask = torch.from_numpy(np.stack([s.mask for s in batch]))
            chunks.append(encoder(ids, mask).numpy().astype(np.float32))
    if not chunks:
        return np.zeros((0, MAX_LEN, encoder.spec.hidden), dtype=np.float32)
    return np.concatenate(chunks, axis=0)


def max_pool(emb: TokenEmbeddings) -> PooledVector:
    """Column-wise maximum over real-token rows; padded rows never count."""
    real = emb.mask == 1
    if not real.any():
        raise PoolingError("cannot max-pool a sequence whose mask has no real tokens")
    return PooledVector(values=emb.matrix[real].max(axis=0))


def masked_max(hidden: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Torch version of max_pool for training paths (batch x seq x hidden)."""
    filled = hidden.masked_fill((mask == 0).unsqueeze(-1), float("-inf"))
    return filled.max(dim=1).values


def dump_embeddings(emb: TokenEmbeddings, path: str | Path) -> None:
    """Debug dump: little-endian header (uint32 n, uint32 d), then row-major
    32-bit floats."""
    n, d = emb.matrix.shape
    with Path(path).open("wb") as handle:
        handle.write(struct.pack("<II", n, d))
        handle.write(np.ascontiguousarray(emb.matrix, dtype="<f4").tobytes())


def load_embedding_dump(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    n, d = struct.unpack("<II", raw[:8])
    matrix = np.frombuffer(raw[8:], dtype="<f4")
    if matrix.size != n * d:
        raise ValueError(f"{path}: dump header says {n}x{d} but holds {matrix.size} values")
    return matrix.reshape(n, d).copy()
