"""Shared fixtures: backend pinning and a small reusable corpus."""

import numpy as np
import pytest

from hgn import backend
from hgn.data import generate_synthetic, write_conll


@pytest.fixture
def numpy_backend():
    """Pin the kernel backend to pure numpy for exact-equality oracles."""
    backend.set_backend("numpy")
    yield
    backend.set_backend(None)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def tiny_corpus_dir(tmp_path_factory):
    """A 24/8/8-sentence synthetic corpus shared by training-level tests."""
    out = tmp_path_factory.mktemp("tiny_corpus")
    train, dev, test = generate_synthetic(24, 8, 8, 5, seed=11)
    write_conll(train, str(out / "train.txt"))
    write_conll(dev, str(out / "dev.txt"))
    write_conll(test, str(out / "test.txt"))
    return out
