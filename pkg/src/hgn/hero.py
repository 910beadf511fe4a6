"""Global sentence encoder: a small post-norm transformer, or frozen vectors.

The trainable variant embeds tokens (word table + positions), then applies
n_layers of multi-head self-attention blocks.  The frozen variant serves
precomputed per-sentence embedding matrices from a tensor container, keyed by
the sentence's 0-based position in its dataset file; nothing upstream of the
local extractors is trained in that mode.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import checkpoint
from .autodiff import Tensor
from .errors import ConfigError, DataError, ShapeError

POSITION_MODES = ("sinusoidal", "learned", "none")


@dataclass(frozen=True)
class HeroConfig:
    d_model: int = 64
    n_layers: int = 2
    n_heads: int = 4
    d_ff: int = 128
    max_len: int = 512
    position_mode: str = "sinusoidal"
    variant: str = "trainable"

    def validate(self) -> None:
        if self.d_model < 2 or self.d_model % 2 != 0:
            raise ConfigError(f"d_model must be even and >= 2, got {self.d_model}")
        if self.n_layers < 0:
            raise ConfigError(f"n_layers must be >= 0, got {self.n_layers}")
        if self.n_heads < 1 or self.d_model % self.n_heads != 0:
            raise ConfigError(
                f"n_heads must divide d_model, got {self.n_heads} vs {self.d_model}"
            )
        if self.d_ff < 1:
            raise ConfigError(f"d_ff must be >= 1, got {self.d_ff}")
        if self.max_len < 1:
            raise ConfigError(f"max_len must be >= 1, got {self.max_len}")
        if self.position_mode not in POSITION_MODES:
            raise ConfigError(f"unknown position_mode {self.position_mode!r}")
        if self.variant not in ("trainable", "frozen"):
            raise ConfigError(f"unknown hero variant {self.variant!r}")


def sinusoidal_positions(max_len: int, d: int) -> np.ndarray:
    """Interleaved sin/cos table (max_len, d); row 0 is [0, 1, 0, 1, ...]."""
    pos = np.arange(max_len, dtype=np.float64)[:, None]
    idx = np.arange(0, d, 2, dtype=np.float64)
    denom = np.power(10000.0, idx / d)
    table = np.zeros((max_len, d))
    table[:, 0::2] = np.sin(pos / denom)
    table[:, 1::2] = np.cos(pos / denom)
    return table


def init_hero_params(rng: np.random.Generator, cfg: HeroConfig, vocab_size: int) -> OrderedDict[str, Tensor]:
    """Fresh trainable-hero parameters; empty for the frozen variant."""
    cfg.validate()
    params: OrderedDict[str, Tensor] = OrderedDict()
    if cfg.variant == "frozen":
        return params

    def add(name: str, values: np.ndarray) -> None:
        params[name] = Tensor(values, requires_grad=True, name=name)

    def glorot(n_in: int, n_out: int) -> np.ndarray:
        bound = np.sqrt(6.0 / (n_in + n_out))
        return rng.uniform(-bound, bound, size=(n_in, n_out))

    d, ff = cfg.d_model, cfg.d_ff
    add("hero.embed.word", rng.normal(0.0, 0.1, size=(vocab_size, d)))
    if cfg.position_mode == "learned":
        add("hero.embed.pos", rng.normal(0.0, 0.1, size=(cfg.max_len, d)))
    for layer in range(1, cfg.n_layers + 1):
        p = f"hero.L{layer}"
        for proj in ("wq", "wk", "wv", "wo"):
            add(f"{p}.attn.{proj}", glorot(d, d))
        for proj in ("bq", "bk", "bv", "bo"):
            add(f"{p}.attn.{proj}", np.zeros(d))
        add(f"{p}.ln1.gain", np.ones(d))
        add(f"{p}.ln1.bias", np.zeros(d))
        add(f"{p}.ffn.w1", glorot(d, ff))
        add(f"{p}.ffn.b1", np.zeros(ff))
        add(f"{p}.ffn.w2", glorot(ff, d))
        add(f"{p}.ffn.b2", np.zeros(d))
        add(f"{p}.ln2.gain", np.ones(d))
        add(f"{p}.ln2.bias", np.zeros(d))
    return params


def embed_tokens(token_ids, params: dict[str, Tensor], cfg: HeroConfig) -> Tensor:
    """Word vectors plus position encodings, one row per token."""
    ids = np.asarray(token_ids, dtype=np.int64)
    if ids.ndim != 1 or ids.size < 1:
        raise ShapeError(f"embed_tokens expects a non-empty id vector, got shape {ids.shape}")
    if ids.size > cfg.max_len:
        raise ShapeError(f"sentence length {ids.size} exceeds max_len {cfg.max_len}")
    x = ad.gather_rows(params["hero.embed.word"], ids)
    if cfg.position_mode == "sinusoidal":
        x = x + Tensor(sinusoidal_positions(ids.size, cfg.d_model))
    elif cfg.position_mode == "learned":
        x = x + ad.gather_rows(params["hero.embed.pos"], np.arange(ids.size))
    return x


def self_attention_block(
    x: Tensor,
    params: dict[str, Tensor],
    prefix: str,
    n_heads: int,
    mask: np.ndarray | None = None,
    collect: list | None = None,
) -> Tensor:
    """Post-norm block: multi-head attention, add+LN, feed-forward, add+LN.

    mask is a boolean keep-vector over positions; masked positions are
    excluded from the attention keys.  collect, when given, receives each
    head's (N, N) attention weight matrix.
    """
    n, d = x.shape
    if d % n_heads != 0:
        raise ShapeError(f"{n_heads} heads do not divide width {d}")
    dh = d // n_heads
    q = ad.add_rowvec(ad.matmul(x, params[f"{prefix}.attn.wq"]), params[f"{prefix}.attn.bq"])
    kk = ad.add_rowvec(ad.matmul(x, params[f"{prefix}.attn.wk"]), params[f"{prefix}.attn.bk"])
    v = ad.add_rowvec(ad.matmul(x, params[f"{prefix}.attn.wv"]), params[f"{prefix}.attn.bv"])
    heads = []
    for h in range(n_heads):
        qh = ad.slice_cols(q, h * dh, (h + 1) * dh)
        kh = ad.slice_cols(kk, h * dh, (h + 1) * dh)
        vh = ad.slice_cols(v, h * dh, (h + 1) * dh)
        scores = ad.scale(ad.matmul(qh, ad.transpose(kh)), 1.0 / np.sqrt(dh))
        weights = ad.softmax_rows(scores, col_mask=mask)
        if collect is not None:
            collect.append(weights.data)
        heads.append(ad.matmul(weights, vh))
    attn = ad.add_rowvec(ad.matmul(ad.concat_cols(heads), params[f"{prefix}.attn.wo"]),
                         params[f"{prefix}.attn.bo"])
    x1 = ad.layer_norm_rows(x + attn, params[f"{prefix}.ln1.gain"], params[f"{prefix}.ln1.bias"])
    hidden = ad.relu(ad.add_rowvec(ad.matmul(x1, params[f"{prefix}.ffn.w1"]),
                                   params[f"{prefix}.ffn.b1"]))
    ff = ad.add_rowvec(ad.matmul(hidden, params[f"{prefix}.ffn.w2"]), params[f"{prefix}.ffn.b2"])
    return ad.layer_norm_rows(x1 + ff, params[f"{prefix}.ln2.gain"], params[f"{prefix}.ln2.bias"])


def encode(
    token_ids,
    params: dict[str, Tensor],
    cfg: HeroConfig,
    mask: np.ndarray | None = None,
    collect: list | None = None,
) -> Tensor:
    """Token ids -> contextual rows (N, d_model) through all layers."""
    cfg.validate()
    x = embed_tokens(token_ids, params, cfg)
    for layer in range(1, cfg.n_layers + 1):
        x = self_attention_block(x, params, f"hero.L{layer}", cfg.n_heads, mask, collect)
    return x


class FrozenHero:
    """Precomputed sentence embeddings read from a tensor container.

    The file stores one (N_i, d) tensor named "sent<i>" per sentence, i being
    the sentence's 0-based position in the corresponding dataset file.
    """

    def __init__(self, path: str, d_model: int):
        self.path = path
        self.d_model = d_model
        self.sentences: dict[int, np.ndarray] = {}
        for name, values in checkpoint.load_tensors(path).items():
            if not name.startswith("sent"):
                raise DataError(f"{path}: unexpected tensor {name!r} in frozen container")
            try:
                idx = int(name[4:])
            except ValueError as exc:
                raise DataError(f"{path}: bad frozen tensor name {name!r}") from exc
            if values.ndim != 2 or values.shape[1] != d_model:
                raise DataError(
                    f"{path}: tensor {name!r} has shape {values.shape}, expected (N, {d_model})"
                )
            self.sentences[idx] = values

    def encode(self, source_index: int, n_tokens: int) -> Tensor:
        if source_index not in self.sentences:
            raise DataError(f"{self.path}: no frozen embedding for sentence {source_index}")
        rows = self.sentences[source_index]
        if rows.shape[0] != n_tokens:
            raise DataError(
                f"{self.path}: sentence {source_index} has {rows.shape[0]} rows, "
                f"expected {n_tokens}"
            )
        return Tensor(rows)


def write_frozen_embeddings(path: str, arrays: list[np.ndarray]) -> None:
    """Write per-sentence embedding matrices as a frozen-hero container."""
    checkpoint.save_tensors(path, OrderedDict((f"sent{i}", a) for i, a in enumerate(arrays)))
