"""Corpus handling: CoNLL files, vocabulary, batches, synthetic data.

CoNLL conventions: whitespace-separated columns, token first, tag last, blank
line between sentences, -DOCSTART- lines skipped.  Sentences beyond the
length cap are a hard error.

The synthetic generator plants single-token entities whose gold tag is a pure
function of the surface words inside a +-k cue window: an ambiguous word is
B-ENT iff a trigger word occurs within that window.  That makes the tags
window-decidable by construction, keeps a per-surface-word majority baseline
near chance, and stays byte-identical for a fixed seed.
"""

from __future__ import annotations

import json
import os
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .tagger import LabelScheme

MAX_SENTENCE_LEN = 512
PAD, UNK = "<pad>", "<unk>"
PAD_ID, UNK_ID = 0, 1


@dataclass
class LabeledSequence:
    tokens: list[str]
    tags: list[str]
    source_index: int = 0


def read_conll(path: str, max_len: int = MAX_SENTENCE_LEN, require_tags: bool = True) -> list[LabeledSequence]:
    """Parse a CoNLL file; with require_tags=False single-column rows get "O"."""
    sentences: list[LabeledSequence] = []
    tokens: list[str] = []
    tags: list[str] = []

    def flush() -> None:
        if tokens:
            if len(tokens) > max_len:
                raise DataError(f"{path}: sentence {len(sentences)} exceeds {max_len} tokens")
            sentences.append(LabeledSequence(tokens.copy(), tags.copy(), len(sentences)))
            tokens.clear()
            tags.clear()

    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    with fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                flush()
                continue
            cols = line.split()
            if cols[0] == "-DOCSTART-":
                flush()
                continue
            if len(cols) < 2:
                if require_tags:
                    raise DataError(f"{path}:{lineno}: token line without a tag column")
                cols = [cols[0], "O"]
            tokens.append(cols[0])
            tags.append(cols[-1])
    flush()
    return sentences


def write_conll(sentences: list[LabeledSequence], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for sent in sentences:
            for token, tag in zip(sent.tokens, sent.tags):
                fh.write(f"{token} {tag}\n")
            fh.write("\n")


@dataclass
class Vocab:
    """Token table with reserved padding (0) and unknown (1) entries."""

    words: list[str]
    index: dict[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.words[:2] != [PAD, UNK]:
            raise DataError(f"vocab must reserve {PAD!r}=0 and {UNK!r}=1")
        if not self.index:
            self.index = {w: i for i, w in enumerate(self.words)}
        if len(self.index) != len(self.words):
            raise DataError("vocab contains duplicate words")

    @classmethod
    def from_corpus(cls, sentences: list[LabeledSequence], min_count: int = 1) -> "Vocab":
        counts: Counter[str] = Counter()
        first_seen: dict[str, int] = {}
        for sent in sentences:
            for token in sent.tokens:
                counts[token] += 1
                first_seen.setdefault(token, len(first_seen))
        kept = [w for w in first_seen if counts[w] >= min_count]
        kept.sort(key=first_seen.__getitem__)
        return cls([PAD, UNK, *kept])

    def __len__(self) -> int:
        return len(self.words)

    def encode(self, tokens: list[str]) -> np.ndarray:
        return np.array([self.index.get(t, UNK_ID) for t in tokens], dtype=np.int64)

    def oov_rate(self, sentences: list[LabeledSequence]) -> float:
        total = hit = 0
        for sent in sentences:
            for token in sent.tokens:
                total += 1
                hit += token not in self.index
        return hit / total if total else 0.0


@dataclass
class Batch:
    token_ids: np.ndarray  # (B, L) int64, padded with PAD_ID
    tag_ids: np.ndarray    # (B, L) int64, padded with the O index
    mask: np.ndarray       # (B, L) bool, True on real tokens
    lengths: np.ndarray    # (B,) int64
    source_indices: np.ndarray  # (B,) int64


def batchify(
    sentences: list[LabeledSequence],
    vocab: Vocab,
    scheme: LabelScheme,
    batch_size: int,
    shuffle_rng: np.random.Generator | None = None,
) -> list[Batch]:
    """Group sentences into padded batches, optionally in shuffled order.

    Padding never changes content: masks mark real tokens and the total
    multiset of (token, tag) pairs is preserved.
    """
    if batch_size < 1:
        raise DataError(f"batch_size must be >= 1, got {batch_size}")
    order = np.arange(len(sentences))
    if shuffle_rng is not None:
        order = shuffle_rng.permutation(len(sentences))
    o_id = scheme.index("O")
    batches: list[Batch] = []
    for lo in range(0, len(sentences), batch_size):
        chunk = [sentences[i] for i in order[lo:lo + batch_size]]
        width = max(len(s.tokens) for s in chunk)
        b = len(chunk)
        token_ids = np.full((b, width), PAD_ID, dtype=np.int64)
        tag_ids = np.full((b, width), o_id, dtype=np.int64)
        mask = np.zeros((b, width), dtype=bool)
        lengths = np.zeros(b, dtype=np.int64)
        src = np.zeros(b, dtype=np.int64)
        for r, sent in enumerate(chunk):
            n = len(sent.tokens)
            token_ids[r, :n] = vocab.encode(sent.tokens)
            tag_ids[r, :n] = scheme.encode(sent.tags)
            mask[r, :n] = True
            lengths[r] = n
            src[r] = sent.source_index
        batches.append(Batch(token_ids, tag_ids, mask, lengths, src))
    return batches


# ---------------------------------------------------------------------------
# synthetic local-cue corpus

N_FILLERS, N_AMBIG, N_TRIGGERS = 40, 8, 4
FILLERS = tuple(f"f{i:02d}" for i in range(N_FILLERS))
AMBIG = tuple(f"amb{i}" for i in range(N_AMBIG))
TRIGGERS = tuple(f"trig{i}" for i in range(N_TRIGGERS))
ENTITY_TYPE = "ENT"


def cue_labels(tokens: list[str], cue_width: int) -> list[str]:
    """Gold tags as a pure function of the surface: amb word is B-ENT iff a
    trigger occurs within the +-k window, k = (cue_width - 1) / 2."""
    k = (cue_width - 1) // 2
    tags = []
    for i, token in enumerate(tokens):
        near = tokens[max(0, i - k):i + k + 1]
        is_ent = token in AMBIG and any(t in TRIGGERS for t in near)
        tags.append(f"B-{ENTITY_TYPE}" if is_ent else "O")
    return tags


_ENTITY_RATE = 0.45  # keeps every ambiguous surface form majority-O


def _gen_sentence(rng: np.random.Generator, cue_width: int) -> LabeledSequence:
    k = (cue_width - 1) // 2
    length = int(rng.integers(8, 19))
    words = [FILLERS[i] for i in rng.integers(0, N_FILLERS, size=length)]
    # Ambiguous words sit > 2k apart so their cue windows never overlap: a
    # trigger planted for one can never flip another.
    n_amb = int(rng.integers(1, 4))
    amb_positions: list[int] = []
    for pos in rng.permutation(length).tolist():
        if len(amb_positions) == n_amb:
            break
        if all(abs(pos - p) > 2 * k for p in amb_positions):
            amb_positions.append(pos)
    amb_positions.sort()
    for pos in amb_positions:
        words[pos] = AMBIG[int(rng.integers(0, N_AMBIG))]
    for pos in amb_positions:
        if rng.random() < _ENTITY_RATE:
            offsets = [o for o in range(-k, k + 1)
                       if o != 0 and 0 <= pos + o < length
                       and words[pos + o] not in AMBIG and words[pos + o] not in TRIGGERS]
            if offsets:
                slot = pos + offsets[int(rng.integers(0, len(offsets)))]
                words[slot] = TRIGGERS[int(rng.integers(0, N_TRIGGERS))]
    # Distractor triggers far from every ambiguous word defeat the
    # "trigger anywhere in the sentence" shortcut.
    for _ in range(int(rng.integers(0, 3))):
        far = [i for i, w in enumerate(words)
               if w in FILLERS and all(abs(i - p) > k for p in amb_positions)]
        if far:
            slot = far[int(rng.integers(0, len(far)))]
            words[slot] = TRIGGERS[int(rng.integers(0, N_TRIGGERS))]
    return LabeledSequence(words, cue_labels(words, cue_width), 0)


def generate_synthetic(
    n_train: int, n_dev: int, n_test: int, cue_width: int, seed: int
) -> tuple[list[LabeledSequence], list[LabeledSequence], list[LabeledSequence]]:
    """Three deterministic splits of cue-window-decidable sentences."""
    if cue_width < 3 or cue_width % 2 == 0:
        raise DataError(f"cue width must be odd and >= 3, got {cue_width}")
    rng = np.random.default_rng(seed)
    splits = []
    for count in (n_train, n_dev, n_test):
        sents = [_gen_sentence(rng, cue_width) for _ in range(count)]
        for i, s in enumerate(sents):
            s.source_index = i
        splits.append(sents)
    return tuple(splits)


def gen_synthetic(out_dir: str, n_sentences: int, cue_width: int, seed: int) -> dict:
    """Write train/dev/test plus a JSON manifest; returns the manifest."""
    n_dev = n_test = max(1, n_sentences // 4)
    train, dev, test = generate_synthetic(n_sentences, n_dev, n_test, cue_width, seed)
    os.makedirs(out_dir, exist_ok=True)
    for name, sents in (("train", train), ("dev", dev), ("test", test)):
        write_conll(sents, os.path.join(out_dir, f"{name}.txt"))
    manifest = {
        "seed": seed,
        "cue_width": cue_width,
        "sentences": {"train": len(train), "dev": len(dev), "test": len(test)},
        "vocabulary": {"fillers": N_FILLERS, "ambiguous": N_AMBIG, "triggers": N_TRIGGERS},
        "entity_type": ENTITY_TYPE,
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest
