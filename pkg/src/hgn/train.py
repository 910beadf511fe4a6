"""Training loop, evaluation, run records, and the ablation driver.

A run record is written as run.json with deterministic content only (config
snapshot, per-epoch losses and dev metrics, final metrics, checkpoint path);
wall-clock time goes to timing.json so two identical runs stay bitwise equal.
Checkpoints carry the parameter tensors; vocabulary, tag inventory, and the
config snapshot travel in a `<checkpoint>.meta.json` sidecar.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import os
import time
from dataclasses import dataclass

import numpy as np

from . import backend, checkpoint
from .config import RunConfig, config_to_dict, config_from_dict
from .data import LabeledSequence, Vocab, batchify, read_conll
from .errors import ConfigError, DataError, TrainingAborted
from .hero import FrozenHero
from .model import HGNModel
from .optim import Adam, clip_global_norm
from .tagger import LabelScheme, bio_decode, entity_prf, token_accuracy

log = logging.getLogger("hgn")

CHECKPOINT_NAME = "checkpoint.hgn"


@dataclass
class RunRecord:
    config: dict
    epochs: list[dict]
    best_epoch: int
    final: dict
    checkpoint: str
    backend: str
    oov_rate_dev: float | None
    wall_clock_sec: float

    def to_json(self) -> str:
        """Canonical JSON, wall clock excluded so reruns are bitwise equal."""
        payload = {
            "config": self.config,
            "epochs": self.epochs,
            "best_epoch": self.best_epoch,
            "final": self.final,
            "checkpoint": self.checkpoint,
            "backend": self.backend,
            "oov_rate_dev": self.oov_rate_dev,
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def evaluate(model: HGNModel, sentences: list[LabeledSequence],
             frozen=None) -> dict:
    """Entity P/R/F1 plus token accuracy over a decoded corpus."""
    gold_spans, pred_spans, gold_tags, pred_tags = [], [], [], []
    for sent in sentences:
        rows = frozen.encode(sent.source_index, len(sent.tokens)).data if frozen else None
        pred = model.predict_tags(sent.tokens, rows)
        gold_spans.append(bio_decode(sent.tags))
        pred_spans.append(bio_decode(pred))
        gold_tags.append(sent.tags)
        pred_tags.append(pred)
    metrics = entity_prf(gold_spans, pred_spans)
    out = metrics.to_dict()
    out["token_accuracy"] = token_accuracy(gold_tags, pred_tags)
    return out


def _load_split(path: str, what: str, max_len: int) -> list[LabeledSequence]:
    if not path:
        raise ConfigError(f"data.{what} is required")
    return read_conll(path, max_len=max_len)


def _frozen_for(cfg: RunConfig, split: str) -> FrozenHero | None:
    if cfg.hero_variant != "frozen":
        return None
    path = getattr(cfg, f"hero_frozen_{split}")
    if not path:
        raise ConfigError(f"hero.frozen_{split} is required for the frozen hero variant")
    return FrozenHero(path, cfg.hero_d_model)


class _ChainedFrozen:
    """Frozen-embedding lookup over two files joined end to end.

    Sentence indices below `n_first` resolve in the first file; the rest in
    the second, shifted.  Used when dev sentences are appended to the
    training corpus.
    """

    def __init__(self, first: FrozenHero, second: FrozenHero, n_first: int):
        self.first = first
        self.second = second
        self.n_first = n_first

    def encode(self, source_index: int, n_tokens: int):
        if source_index < self.n_first:
            return self.first.encode(source_index, n_tokens)
        return self.second.encode(source_index - self.n_first, n_tokens)


def train_run(cfg: RunConfig, out_dir: str | None = None) -> tuple[RunRecord, HGNModel]:
    cfg.validate()
    t0 = time.monotonic()
    out_dir = out_dir or cfg.out_dir
    os.makedirs(out_dir, exist_ok=True)

    train_sents = _load_split(cfg.data_train, "train", cfg.hero_max_len)
    if not train_sents:
        raise DataError(f"{cfg.data_train}: no sentences")
    dev_sents = read_conll(cfg.data_dev, max_len=cfg.hero_max_len) if cfg.data_dev else None
    test_sents = read_conll(cfg.data_test, max_len=cfg.hero_max_len) if cfg.data_test else None

    frozen_train = _frozen_for(cfg, "train")
    frozen_dev = _frozen_for(cfg, "dev") if dev_sents else None
    frozen_test = _frozen_for(cfg, "test") if test_sents else None

    if cfg.train_on_dev:
        if not dev_sents:
            raise ConfigError("train.on_dev requires data.dev")
        offset = len(train_sents)
        train_sents = train_sents + [
            dataclasses.replace(s, source_index=offset + s.source_index) for s in dev_sents
        ]
        if frozen_train is not None:
            frozen_train = _ChainedFrozen(frozen_train, frozen_dev, offset)

    vocab = Vocab.from_corpus(train_sents, min_count=cfg.data_min_count)
    scheme_source = list(train_sents)
    for extra in (dev_sents, test_sents):
        if extra:
            scheme_source.extend(extra)
    scheme = LabelScheme.from_corpus(scheme_source)

    root = np.random.default_rng(cfg.train_seed)
    init_rng, shuffle_rng, dropout_rng = root.spawn(3)
    model = HGNModel(cfg, vocab, scheme, rng=init_rng)
    params = model.parameters()
    opt = Adam(params, lr=cfg.train_lr, weight_decay=cfg.train_weight_decay)

    oov_dev = vocab.oov_rate(dev_sents) if dev_sents else None
    log.info("training: %d sentences, %d vocab, %d tags, %d params, backend=%s",
             len(train_sents), len(vocab), scheme.n_tags,
             sum(p.size for p in params), backend.active_backend())
    if oov_dev is not None:
        log.info("dev OOV rate: %.4f", oov_dev)

    epoch_rows: list[dict] = []
    best_f1 = -1.0
    best_epoch = 0
    best_state = None
    drng = dropout_rng if cfg.train_dropout > 0.0 else None
    for epoch in range(1, cfg.train_epochs + 1):
        if cfg.train_lr_decay == "linear":
            opt.set_lr(cfg.train_lr * (cfg.train_epochs - epoch + 1) / cfg.train_epochs)
        loss_sum = 0.0
        token_count = 0
        for batch in batchify(train_sents, vocab, scheme, cfg.train_batch_size, shuffle_rng):
            total = int(batch.lengths.sum())
            for r in range(batch.token_ids.shape[0]):
                n = int(batch.lengths[r])
                ids = batch.token_ids[r, :n]
                tag_ids = batch.tag_ids[r, :n]
                rows = None
                if frozen_train is not None:
                    rows = frozen_train.encode(int(batch.source_indices[r]), n).data
                loss = model.loss_sentence(ids, tag_ids, rows, drng)
                if not loss.all_finite():
                    raise TrainingAborted(
                        f"non-finite loss at epoch {epoch} "
                        f"(sentence {int(batch.source_indices[r])})"
                    )
                loss.backward(seed=n / total)
                loss_sum += loss.item() * n
                token_count += n
            clip_global_norm(params, cfg.train_clip_norm)
            opt.step()
            model.zero_grad()
        train_loss = loss_sum / token_count
        row = {"epoch": epoch, "train_loss": train_loss, "dev": None}
        if dev_sents:
            row["dev"] = evaluate(model, dev_sents, frozen_dev)
            if row["dev"]["f1"] > best_f1:
                best_f1 = row["dev"]["f1"]
                best_epoch = epoch
                best_state = model.state_arrays()
            log.info("epoch %d: train loss %.4f, dev F1 %.4f", epoch, train_loss, row["dev"]["f1"])
        else:
            log.info("epoch %d: train loss %.4f", epoch, train_loss)
        epoch_rows.append(row)

    if best_state is not None:
        model.load_state_arrays(best_state)
    else:
        best_epoch = cfg.train_epochs

    final = {"train": evaluate(model, train_sents, frozen_train)}
    final["dev"] = evaluate(model, dev_sents, frozen_dev) if dev_sents else None
    final["test"] = evaluate(model, test_sents, frozen_test) if test_sents else None

    ckpt_path = os.path.join(out_dir, CHECKPOINT_NAME)
    checkpoint.save_tensors(ckpt_path, model.state_arrays())
    meta = {
        "config": config_to_dict(cfg),
        "vocab": vocab.words,
        "tags": list(scheme.tags),
    }
    with open(ckpt_path + ".meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")

    record = RunRecord(
        config=config_to_dict(cfg),
        epochs=epoch_rows,
        best_epoch=best_epoch,
        final=final,
        checkpoint=CHECKPOINT_NAME,
        backend=backend.active_backend(),
        oov_rate_dev=oov_dev,
        wall_clock_sec=time.monotonic() - t0,
    )
    with open(os.path.join(out_dir, "run.json"), "w", encoding="utf-8") as fh:
        fh.write(record.to_json())
    with open(os.path.join(out_dir, "timing.json"), "w", encoding="utf-8") as fh:
        json.dump({"wall_clock_sec": record.wall_clock_sec}, fh)
        fh.write("\n")
    log.info("best epoch %d, wall clock %.1fs", best_epoch, record.wall_clock_sec)
    return record, model


def load_model(ckpt_path: str) -> HGNModel:
    """Rebuild a model from a checkpoint and its .meta.json sidecar."""
    meta_path = ckpt_path + ".meta.json"
    try:
        with open(meta_path, "r", encoding="utf-8") as fh:
            meta = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read checkpoint sidecar {meta_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{meta_path}: invalid JSON: {exc}") from exc
    cfg = config_from_dict(meta["config"])
    vocab = Vocab(list(meta["vocab"]))
    scheme = LabelScheme(tuple(meta["tags"]))
    model = HGNModel(cfg, vocab, scheme, rng=np.random.default_rng(0))
    model.load_state_arrays(checkpoint.load_tensors(ckpt_path))
    return model


def ablate_run(cfg: RunConfig, sweep: dict, out_dir: str | None = None) -> dict:
    """Train sweep variants plus the no-Gang baseline under a shared budget.

    sweep: {"windows": [[3], [5], ...], "cells": ["lstm", ...]}, both optional.
    Reports each variant's F1 on the test split (dev, then train, when absent)
    and its delta against the baseline.
    """
    out_dir = out_dir or cfg.out_dir
    variants: list[tuple[str, RunConfig]] = []
    for ws in sweep.get("windows", []):
        windows = tuple(int(w) for w in ws)
        label = "windows_" + "-".join(str(w) for w in windows)
        variants.append((label, dataclasses.replace(cfg, gang_windows=windows)))
    for cell in sweep.get("cells", []):
        variants.append((f"cell_{cell}", dataclasses.replace(cfg, gang_cell=str(cell))))
    if not variants:
        raise ConfigError("sweep lists neither window sets nor cell kinds")

    split = "test" if cfg.data_test else ("dev" if cfg.data_dev else "train")

    def run_one(label: str, variant_cfg: RunConfig) -> dict:
        sub = os.path.join(out_dir, label)
        record, _ = train_run(dataclasses.replace(variant_cfg, out_dir=sub), sub)
        metrics = record.final[split] or record.final["train"]
        log.info("ablation %s: %s F1 %.4f", label, split, metrics["f1"])
        return {"label": label, "split": split, "precision": metrics["precision"],
                "recall": metrics["recall"], "f1": metrics["f1"]}

    rows = [run_one("base", dataclasses.replace(cfg, gang_enabled=False))]
    for label, variant_cfg in variants:
        rows.append(run_one(label, variant_cfg))
    base_f1 = rows[0]["f1"]
    for row in rows:
        row["delta_f1"] = row["f1"] - base_f1
    report = {"split": split, "baseline_f1": base_f1, "rows": rows}
    with open(os.path.join(out_dir, "ablation.json"), "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return report
