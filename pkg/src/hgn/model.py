"""End-to-end assembly: encoder -> local extractors -> fusion -> tagger.

The model owns an ordered name -> Tensor parameter registry (the checkpoint
layout) and builds a fresh graph per sentence.  Batches arrive padded; rows
are trimmed to their true length before encoding, so padding can never leak
into predictions.
"""

from __future__ import annotations

from collections import OrderedDict

import numpy as np

from . import fusion as fusion_mod
from . import gang as gang_mod
from . import hero as hero_mod
from . import tagger as tagger_mod
from .autodiff import Tensor, dropout
from .config import RunConfig
from .data import Vocab
from .errors import ConfigError, DataError
from .tagger import LabelScheme


class HGNModel:
    def __init__(self, cfg: RunConfig, vocab: Vocab, scheme: LabelScheme,
                 rng: np.random.Generator | None = None):
        cfg.validate()
        self.cfg = cfg
        self.vocab = vocab
        self.scheme = scheme
        self.hero_cfg = hero_mod.HeroConfig(
            d_model=cfg.hero_d_model, n_layers=cfg.hero_n_layers, n_heads=cfg.hero_n_heads,
            d_ff=cfg.hero_d_ff, max_len=cfg.hero_max_len,
            position_mode=cfg.hero_position_mode, variant=cfg.hero_variant,
        )
        self.gang_cfg = gang_mod.GangConfig(windows=cfg.gang_windows, cell=cfg.gang_cell)
        self.fusion_cfg = fusion_mod.FusionConfig(
            mode=cfg.fusion_mode, scale_scores=cfg.fusion_scale_scores,
            mlp_tanh=cfg.fusion_mlp_tanh,
        )
        if rng is None:
            rng = np.random.default_rng(cfg.train_seed)
        d = cfg.hero_d_model
        n_windows = len(cfg.gang_windows) if cfg.gang_enabled else 0
        self.params: OrderedDict[str, Tensor] = OrderedDict()
        self.params.update(hero_mod.init_hero_params(rng, self.hero_cfg, len(vocab)))
        if cfg.gang_enabled:
            self.params.update(gang_mod.init_gang_params(rng, d, self.gang_cfg))
            self.params.update(fusion_mod.init_fusion_params(rng, d, n_windows, self.fusion_cfg))
            width = fusion_mod.fused_width(self.fusion_cfg, d, n_windows)
        else:
            width = d
        self.params.update(tagger_mod.init_tagger_params(rng, width, scheme.n_tags))

    # -- parameter registry -------------------------------------------------

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def state_arrays(self) -> OrderedDict[str, np.ndarray]:
        return OrderedDict((name, t.data.copy()) for name, t in self.params.items())

    def load_state_arrays(self, arrays) -> None:
        missing = [n for n in self.params if n not in arrays]
        extra = [n for n in arrays if n not in self.params]
        if missing or extra:
            raise DataError(f"checkpoint mismatch: missing {missing}, unexpected {extra}")
        for name, t in self.params.items():
            values = np.asarray(arrays[name], dtype=np.float64)
            if values.shape != t.data.shape:
                raise DataError(
                    f"checkpoint tensor {name} has shape {values.shape}, expected {t.data.shape}"
                )
            t.data = values.copy()

    # -- forward ------------------------------------------------------------

    def encode(self, token_ids: np.ndarray, frozen_rows: np.ndarray | None = None) -> Tensor:
        if self.cfg.hero_variant == "frozen":
            if frozen_rows is None:
                raise ConfigError("frozen hero variant needs precomputed sentence rows")
            if frozen_rows.shape != (len(token_ids), self.cfg.hero_d_model):
                raise DataError(
                    f"frozen rows {frozen_rows.shape} do not match "
                    f"({len(token_ids)}, {self.cfg.hero_d_model})"
                )
            return Tensor(frozen_rows)
        return hero_mod.encode(token_ids, self.params, self.hero_cfg)

    def forward_sentence(
        self,
        token_ids: np.ndarray,
        frozen_rows: np.ndarray | None = None,
        dropout_rng: np.random.Generator | None = None,
    ) -> Tensor:
        """Per-token tag distributions (N, n_tags) for one unpadded sentence."""
        rate = self.cfg.train_dropout if dropout_rng is not None else 0.0
        z = self.encode(token_ids, frozen_rows)
        if rate > 0.0:
            z = dropout(z, rate, dropout_rng)
        if self.cfg.gang_enabled:
            locals_ = gang_mod.gang_forward(z, self.gang_cfg, self.params)
            s = fusion_mod.fuse(z, locals_, self.fusion_cfg, self.params)
        else:
            s = z
        if rate > 0.0:
            s = dropout(s, rate, dropout_rng)
        return tagger_mod.classify(s, self.params)

    def loss_sentence(
        self,
        token_ids: np.ndarray,
        tag_ids: np.ndarray,
        frozen_rows: np.ndarray | None = None,
        dropout_rng: np.random.Generator | None = None,
    ) -> Tensor:
        probs = self.forward_sentence(token_ids, frozen_rows, dropout_rng)
        return tagger_mod.sequence_loss(probs, tag_ids)

    def predict_tags(self, tokens: list[str], frozen_rows: np.ndarray | None = None) -> list[str]:
        ids = self.vocab.encode(tokens)
        probs = self.forward_sentence(ids, frozen_rows)
        return tagger_mod.decode_tags(probs.data, self.scheme)
