"""CoNLL files, vocabulary, batching, and the synthetic cue corpus."""

import json
from collections import Counter

import numpy as np
import pytest

from hgn.data import (
    AMBIG,
    MAX_SENTENCE_LEN,
    PAD,
    PAD_ID,
    TRIGGERS,
    UNK,
    UNK_ID,
    FILLERS,
    LabeledSequence,
    Vocab,
    batchify,
    cue_labels,
    gen_synthetic,
    generate_synthetic,
    read_conll,
    write_conll,
)
from hgn.errors import DataError
from hgn.tagger import LabelScheme, bio_decode, entity_prf


def _write(tmp_path, text, name="corpus.txt"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


# -- CoNLL parsing ------------------------------------------------------------

def test_read_basic_two_sentences(tmp_path):
    path = _write(tmp_path, "tok1 B-PER\ntok2 O\n\ntok3 O\n")
    sents = read_conll(path)
    assert len(sents) == 2
    assert sents[0].tokens == ["tok1", "tok2"]
    assert sents[0].tags == ["B-PER", "O"]
    assert sents[1].tokens == ["tok3"]
    assert [s.source_index for s in sents] == [0, 1]


def test_read_skips_docstart_and_flushes(tmp_path):
    path = _write(tmp_path, "-DOCSTART- -X- O\n\nw1 O\nw2 O\n-DOCSTART- O\nw3 O\n")
    sents = read_conll(path)
    assert [s.tokens for s in sents] == [["w1", "w2"], ["w3"]]


def test_read_takes_last_column_as_tag(tmp_path):
    path = _write(tmp_path, "West NNP I-NP B-MISC\n")
    sents = read_conll(path)
    assert sents[0].tokens == ["West"]
    assert sents[0].tags == ["B-MISC"]


def test_read_missing_tag_column_reports_line(tmp_path):
    path = _write(tmp_path, "w1 O\nw2 O\nlonely\n")
    with pytest.raises(DataError, match=":3:"):
        read_conll(path)


def test_read_without_required_tags_defaults_to_o(tmp_path):
    path = _write(tmp_path, "w1\nw2\n")
    sents = read_conll(path, require_tags=False)
    assert sents[0].tags == ["O", "O"]


def test_read_enforces_length_cap(tmp_path):
    path = _write(tmp_path, "".join("w O\n" for _ in range(6)))
    with pytest.raises(DataError, match="exceeds"):
        read_conll(path, max_len=5)
    assert MAX_SENTENCE_LEN == 512


def test_read_flushes_trailing_sentence_without_blank(tmp_path):
    path = _write(tmp_path, "w1 O\nw2 B-PER")
    sents = read_conll(path)
    assert len(sents) == 1
    assert sents[0].tags == ["O", "B-PER"]


def test_read_empty_file(tmp_path):
    assert read_conll(_write(tmp_path, "")) == []


def test_write_read_identity(tmp_path):
    sents = [
        LabeledSequence(["a", "b"], ["O", "B-PER"], 0),
        LabeledSequence(["c"], ["I-LOC"], 1),
    ]
    path = str(tmp_path / "round.txt")
    write_conll(sents, path)
    back = read_conll(path)
    assert [(s.tokens, s.tags, s.source_index) for s in back] == \
        [(s.tokens, s.tags, s.source_index) for s in sents]


# -- vocabulary ---------------------------------------------------------------

def test_vocab_first_seen_order_and_ids():
    sents = [LabeledSequence(["a", "b", "a"], ["O"] * 3, 0)]
    vocab = Vocab.from_corpus(sents, min_count=1)
    assert vocab.words == [PAD, UNK, "a", "b"]
    assert vocab.index["a"] == 2
    assert vocab.index["b"] == 3
    assert (PAD_ID, UNK_ID) == (0, 1)
    assert len(vocab) == 4


def test_vocab_min_count_filters():
    sents = [LabeledSequence(["a", "b", "a"], ["O"] * 3, 0)]
    vocab = Vocab.from_corpus(sents, min_count=2)
    assert vocab.words == [PAD, UNK, "a"]


def test_vocab_encode_maps_unknown():
    vocab = Vocab.from_corpus([LabeledSequence(["a"], ["O"], 0)])
    assert np.array_equal(vocab.encode(["a", "zzz"]), [2, 1])


def test_vocab_determinism():
    sents = [LabeledSequence(["x", "y"], ["O", "O"], 0), LabeledSequence(["z"], ["O"], 1)]
    assert Vocab.from_corpus(sents).words == Vocab.from_corpus(sents).words


def test_vocab_validation():
    with pytest.raises(DataError):
        Vocab(["a", "b"])
    with pytest.raises(DataError):
        Vocab([PAD, UNK, "a", "a"])


def test_vocab_oov_rate():
    vocab = Vocab.from_corpus([LabeledSequence(["a", "b"], ["O", "O"], 0)])
    held_out = [LabeledSequence(["a", "b", "c", "d"], ["O"] * 4, 0)]
    assert vocab.oov_rate(held_out) == 0.5
    assert vocab.oov_rate([]) == 0.0


# -- batching -----------------------------------------------------------------

def _tiny_corpus():
    sents = [
        LabeledSequence([f"w{i}", "amb"], ["O", "B-ENT"], i) for i in range(5)
    ]
    vocab = Vocab.from_corpus(sents)
    scheme = LabelScheme.from_types(["ENT"])
    return sents, vocab, scheme


def test_batch_sizes_two_two_one():
    sents, vocab, scheme = _tiny_corpus()
    batches = batchify(sents, vocab, scheme, batch_size=2)
    assert [b.token_ids.shape[0] for b in batches] == [2, 2, 1]


def test_batch_order_without_shuffle():
    sents, vocab, scheme = _tiny_corpus()
    batches = batchify(sents, vocab, scheme, batch_size=2)
    assert np.concatenate([b.source_indices for b in batches]).tolist() == [0, 1, 2, 3, 4]


def test_batch_same_seed_same_order():
    sents, vocab, scheme = _tiny_corpus()
    a = batchify(sents, vocab, scheme, 2, np.random.default_rng(7))
    b = batchify(sents, vocab, scheme, 2, np.random.default_rng(7))
    for x, y in zip(a, b):
        assert np.array_equal(x.token_ids, y.token_ids)
        assert np.array_equal(x.source_indices, y.source_indices)


def test_batch_shuffle_preserves_token_tag_multiset(rng):
    sents = [
        LabeledSequence([f"w{i}"] * (i + 1), ["O"] * (i + 1), i) for i in range(6)
    ]
    vocab = Vocab.from_corpus(sents)
    scheme = LabelScheme.from_types(["ENT"])
    direct = Counter()
    for s in sents:
        direct.update(zip(vocab.encode(s.tokens).tolist(), scheme.encode(s.tags).tolist()))
    batched = Counter()
    for b in batchify(sents, vocab, scheme, 4, rng):
        for row in range(b.token_ids.shape[0]):
            keep = b.mask[row]
            batched.update(zip(b.token_ids[row, keep].tolist(), b.tag_ids[row, keep].tolist()))
    assert batched == direct


def test_batch_padding_and_masks():
    sents, vocab, scheme = _tiny_corpus()
    sents[0].tokens, sents[0].tags = ["solo"], ["O"]
    vocab = Vocab.from_corpus(sents)
    batch = batchify(sents[:2], vocab, scheme, 2)[0]
    assert batch.mask.sum(axis=1).tolist() == batch.lengths.tolist() == [1, 2]
    assert batch.token_ids[0, 1] == PAD_ID
    assert batch.tag_ids[0, 1] == scheme.index("O")


def test_batch_size_must_be_positive():
    sents, vocab, scheme = _tiny_corpus()
    with pytest.raises(DataError):
        batchify(sents, vocab, scheme, 0)


# -- synthetic corpus ---------------------------------------------------------

def test_synthetic_same_seed_is_identical():
    a = generate_synthetic(12, 3, 3, 5, seed=4)
    b = generate_synthetic(12, 3, 3, 5, seed=4)
    for split_a, split_b in zip(a, b):
        assert [(s.tokens, s.tags) for s in split_a] == [(s.tokens, s.tags) for s in split_b]


def test_synthetic_seeds_differ():
    a, _, _ = generate_synthetic(12, 1, 1, 5, seed=4)
    b, _, _ = generate_synthetic(12, 1, 1, 5, seed=5)
    assert [s.tokens for s in a] != [s.tokens for s in b]


def test_synthetic_cue_width_validation():
    with pytest.raises(DataError):
        generate_synthetic(2, 1, 1, 4, seed=0)
    with pytest.raises(DataError):
        generate_synthetic(2, 1, 1, 1, seed=0)


def test_synthetic_shape_of_sentences():
    train, dev, test = generate_synthetic(30, 5, 5, 5, seed=3)
    assert (len(train), len(dev), len(test)) == (30, 5, 5)
    assert [s.source_index for s in dev] == list(range(5))
    for s in train:
        assert 8 <= len(s.tokens) <= 18
        assert len(s.tags) == len(s.tokens)
    assert any("B-ENT" in s.tags for s in test)


def test_synthetic_tags_are_window_decidable():
    train, _, _ = generate_synthetic(40, 1, 1, 5, seed=3)
    k = 2
    for s in train:
        assert s.tags == cue_labels(s.tokens, 5)
        for i, (tok, tag) in enumerate(zip(s.tokens, s.tags)):
            near = s.tokens[max(0, i - k):i + k + 1]
            has_trigger = any(t in TRIGGERS for t in near)
            if tag == "B-ENT":
                assert tok in AMBIG and has_trigger
            else:
                assert tag == "O"
                if tok in AMBIG:
                    assert not has_trigger


def test_synthetic_relabeling_outside_window_never_flips(rng):
    train, _, _ = generate_synthetic(15, 1, 1, 5, seed=6)
    k = 2
    for s in train:
        amb_idx = [i for i, t in enumerate(s.tokens) if t in AMBIG]
        for i in amb_idx:
            outside = [j for j in range(len(s.tokens))
                       if abs(j - i) > k and s.tokens[j] not in AMBIG]
            for j in outside:
                for replacement in (TRIGGERS[0], FILLERS[0]):
                    mutated = s.tokens.copy()
                    mutated[j] = replacement
                    assert cue_labels(mutated, 5)[i] == s.tags[i]


def test_synthetic_entity_rate_near_plant_probability():
    train, _, _ = generate_synthetic(400, 1, 1, 5, seed=3)
    n_amb = n_ent = 0
    for s in train:
        for tok, tag in zip(s.tokens, s.tags):
            if tok in AMBIG:
                n_amb += 1
                n_ent += tag == "B-ENT"
    assert 0.3 < n_ent / n_amb < 0.55


def test_majority_baseline_stays_weak():
    train, _, test = generate_synthetic(400, 1, 100, 5, seed=3)
    votes = {}
    for s in train:
        for tok, tag in zip(s.tokens, s.tags):
            votes.setdefault(tok, Counter())[tag] += 1
    gold, pred = [], []
    for s in test:
        gold.append(bio_decode(s.tags))
        guessed = [votes[t].most_common(1)[0][0] if t in votes else "O" for t in s.tokens]
        pred.append(bio_decode(guessed))
    assert entity_prf(gold, pred).f1 <= 0.6


def test_gen_synthetic_writes_files_and_manifest(tmp_path):
    out = tmp_path / "syn"
    manifest = gen_synthetic(str(out), 8, 5, seed=2)
    for name in ("train.txt", "dev.txt", "test.txt", "manifest.json"):
        assert (out / name).exists()
    assert manifest["sentences"] == {"train": 8, "dev": 2, "test": 2}
    assert manifest["seed"] == 2
    assert manifest["cue_width"] == 5
    assert manifest["entity_type"] == "ENT"
    assert manifest["vocabulary"] == {"fillers": 40, "ambiguous": 8, "triggers": 4}
    on_disk = json.loads((out / "manifest.json").read_text())
    assert on_disk == manifest
    assert len(read_conll(str(out / "train.txt"))) == 8


def test_gen_synthetic_byte_identical_reruns(tmp_path):
    first = tmp_path / "one"
    second = tmp_path / "two"
    gen_synthetic(str(first), 10, 5, seed=9)
    gen_synthetic(str(second), 10, 5, seed=9)
    for name in ("train.txt", "dev.txt", "test.txt", "manifest.json"):
        assert (first / name).read_bytes() == (second / name).read_bytes()
