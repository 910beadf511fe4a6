"""Softmax tag classifier, BIO span decoding, and entity-level metrics.

Spans are (start, end, type) with 1-based inclusive indices.  Decoding repairs
orphan I- tags the way conlleval does: an I-t after O, after a different
type, or at sentence start opens a new span.  Metrics are micro-averaged
exact-match precision/recall/F1 as rationals in [0, 1], with 0/0 -> 0.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import DataError, ShapeError

Span = tuple[int, int, str]


@dataclass(frozen=True)
class LabelScheme:
    """BIO tag inventory: O at index 0, then B-t/I-t per entity type."""

    tags: tuple[str, ...]

    @classmethod
    def from_types(cls, types: Sequence[str]) -> "LabelScheme":
        ordered = sorted(set(types))
        tags = ["O"]
        for t in ordered:
            tags.extend((f"B-{t}", f"I-{t}"))
        return cls(tuple(tags))

    @classmethod
    def from_corpus(cls, sentences) -> "LabelScheme":
        types = set()
        for sent in sentences:
            for tag in sent.tags:
                if tag == "O":
                    continue
                prefix, entity_type = _split_tag(tag)
                types.add(entity_type)
        return cls.from_types(sorted(types))

    @property
    def n_tags(self) -> int:
        return len(self.tags)

    def index(self, tag: str) -> int:
        try:
            return self.tags.index(tag)
        except ValueError as exc:
            raise DataError(f"unknown tag {tag!r}; scheme has {list(self.tags)}") from exc

    def encode(self, tags: Sequence[str]) -> np.ndarray:
        return np.array([self.index(t) for t in tags], dtype=np.int64)


def _split_tag(tag: str) -> tuple[str, str]:
    if tag == "O":
        return "O", ""
    if len(tag) < 3 or tag[1] != "-" or tag[0] not in ("B", "I"):
        raise DataError(f"malformed BIO tag {tag!r}")
    return tag[0], tag[2:]


def init_tagger_params(rng: np.random.Generator, in_width: int, n_tags: int) -> OrderedDict[str, Tensor]:
    bound = np.sqrt(6.0 / (in_width + n_tags))
    w = rng.uniform(-bound, bound, size=(in_width, n_tags))
    return OrderedDict(
        (name, Tensor(v, requires_grad=True, name=name))
        for name, v in (("tagger.w", w), ("tagger.b", np.zeros(n_tags)))
    )


def classify(s: Tensor, params: Mapping[str, Tensor]) -> Tensor:
    """Fused rows -> per-token tag distributions (rows sum to 1)."""
    logits = ad.add_rowvec(ad.matmul(s, params["tagger.w"]), params["tagger.b"])
    return ad.softmax_rows(logits)


def sequence_loss(probs: Tensor, tag_ids, mask=None) -> Tensor:
    """Mean NLL of the gold tags over unmasked positions."""
    return ad.nll_loss(probs, tag_ids, mask)


def decode_tags(probs: np.ndarray, scheme: LabelScheme) -> list[str]:
    """Row-argmax tags; ties resolve to the lowest tag index."""
    probs = np.asarray(probs)
    if probs.ndim != 2 or probs.shape[1] != scheme.n_tags:
        raise ShapeError(f"decode_tags: probs {probs.shape} vs {scheme.n_tags} tags")
    return [scheme.tags[j] for j in probs.argmax(axis=1)]


def bio_decode(tags: Sequence[str], scheme: LabelScheme | None = None) -> list[Span]:
    """Tag strings -> entity spans, repairing orphan I- tags conlleval-style."""
    spans: list[Span] = []
    start = 0
    current = ""
    for pos, tag in enumerate(tags, start=1):
        if scheme is not None and tag not in scheme.tags:
            raise DataError(f"unknown tag {tag!r} at position {pos}")
        prefix, entity_type = _split_tag(tag)
        if prefix == "O":
            if current:
                spans.append((start, pos - 1, current))
                current = ""
        elif prefix == "B" or entity_type != current:
            if current:
                spans.append((start, pos - 1, current))
            start, current = pos, entity_type
    if current:
        spans.append((start, len(tags), current))
    return spans


@dataclass
class Metrics:
    precision: float
    recall: float
    f1: float
    per_type: dict[str, dict[str, float]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "per_type": self.per_type,
        }


def _prf(tp: int, n_pred: int, n_gold: int) -> tuple[float, float, float]:
    p = tp / n_pred if n_pred else 0.0
    r = tp / n_gold if n_gold else 0.0
    f1 = 2.0 * p * r / (p + r) if p + r else 0.0
    return p, r, f1


def entity_prf(gold_spans: Sequence[Sequence[Span]], pred_spans: Sequence[Sequence[Span]]) -> Metrics:
    """Micro P/R/F1 over exact (start, end, type) matches, plus per-type rows."""
    if len(gold_spans) != len(pred_spans):
        raise ShapeError(
            f"entity_prf: {len(gold_spans)} gold sentences vs {len(pred_spans)} predicted"
        )
    tp = n_pred = n_gold = 0
    by_type: dict[str, list[int]] = {}
    for gold, pred in zip(gold_spans, pred_spans):
        gold_set, pred_set = set(gold), set(pred)
        tp += len(gold_set & pred_set)
        n_pred += len(pred_set)
        n_gold += len(gold_set)
        for span in gold_set | pred_set:
            row = by_type.setdefault(span[2], [0, 0, 0])
            row[0] += int(span in gold_set and span in pred_set)
            row[1] += int(span in pred_set)
            row[2] += int(span in gold_set)
    p, r, f1 = _prf(tp, n_pred, n_gold)
    per_type = {}
    for entity_type, (t_tp, t_pred, t_gold) in sorted(by_type.items()):
        tps, trs, tf1 = _prf(t_tp, t_pred, t_gold)
        per_type[entity_type] = {"precision": tps, "recall": trs, "f1": tf1}
    return Metrics(p, r, f1, per_type)


def token_accuracy(gold_tags: Sequence[Sequence[str]], pred_tags: Sequence[Sequence[str]]) -> float:
    """Fraction of tokens tagged exactly right; 0 on an empty corpus."""
    correct = total = 0
    for gold, pred in zip(gold_tags, pred_tags):
        if len(gold) != len(pred):
            raise ShapeError(f"token_accuracy: {len(gold)} gold tags vs {len(pred)} predicted")
        correct += sum(g == p for g, p in zip(gold, pred))
        total += len(gold)
    return correct / total if total else 0.0
