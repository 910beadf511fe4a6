"""Whole-model gradient verification across cell and fusion combinations.

Builds a tiny end-to-end model (d=8, one layer, two windows, four tokens) for
every cell x fusion pair, plus one frozen-encoder entry, and runs central
finite differences over every parameter coordinate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .data import PAD, UNK, Vocab
from .fusion import FUSION_MODES
from .gang import CELL_KINDS
from .gradcheck import GradCheckReport, finite_diff_check
from .model import HGNModel
from .tagger import LabelScheme

TINY_WORDS = [PAD, UNK, "w0", "w1", "w2", "w3", "w4", "w5"]


def tiny_config(cell: str, fusion_mode: str, variant: str = "trainable") -> RunConfig:
    return RunConfig(
        hero_variant=variant, hero_d_model=8, hero_n_layers=1, hero_n_heads=2,
        hero_d_ff=16, hero_max_len=8, gang_windows=(1, 3), gang_cell=cell,
        fusion_mode=fusion_mode, train_seed=7,
    )


def tiny_model(cell: str, fusion_mode: str, variant: str = "trainable"):
    """(model, token_ids, tag_ids, frozen_rows) for one tiny configuration."""
    cfg = tiny_config(cell, fusion_mode, variant)
    vocab = Vocab(list(TINY_WORDS))
    scheme = LabelScheme.from_types(["X"])
    rng = np.random.default_rng(11)
    model = HGNModel(cfg, vocab, scheme, rng=rng)
    token_ids = np.array([2, 3, 4, 5], dtype=np.int64)
    tag_ids = np.array([0, 1, 2, 0], dtype=np.int64)
    frozen_rows = rng.normal(0.0, 0.5, size=(4, 8)) if variant == "frozen" else None
    return model, token_ids, tag_ids, frozen_rows


@dataclass
class VerifyEntry:
    label: str
    report: GradCheckReport
    hero_grad_norm: float | None = None  # only for the frozen entry


def check_one(cell: str, fusion_mode: str, h: float = 1e-4, tol: float = 1e-4) -> VerifyEntry:
    model, ids, tags, _ = tiny_model(cell, fusion_mode)
    report = finite_diff_check(lambda: model.loss_sentence(ids, tags),
                               model.parameters(), h=h, tol=tol)
    return VerifyEntry(f"{cell}/{fusion_mode}", report)


def check_frozen(h: float = 1e-4, tol: float = 1e-4) -> VerifyEntry:
    """Frozen encoder: no hero parameters exist, so hero gradients are zero
    by construction; the remaining modules still pass finite differences."""
    model, ids, tags, rows = tiny_model("lstm", "mlp", variant="frozen")
    model.zero_grad()
    loss = model.loss_sentence(ids, tags, rows)
    loss.backward()
    hero_sq = 0.0
    for name, p in model.params.items():
        if name.startswith("hero.") and p.grad is not None:
            hero_sq += float((p.grad * p.grad).sum())
    model.zero_grad()
    report = finite_diff_check(lambda: model.loss_sentence(ids, tags, rows),
                               model.parameters(), h=h, tol=tol)
    return VerifyEntry("lstm/mlp+frozen-hero", report, hero_grad_norm=float(np.sqrt(hero_sq)))


def run_gradcheck(
    cells=CELL_KINDS, fusions=FUSION_MODES, h: float = 1e-4, tol: float = 1e-4,
    include_frozen: bool = True,
) -> list[VerifyEntry]:
    entries = [check_one(c, f, h, tol) for c in cells for f in fusions]
    if include_frozen:
        entries.append(check_frozen(h, tol))
    return entries
