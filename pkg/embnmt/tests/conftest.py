"""
Copyright ©2025. The Regents of the University of California (Regents). All Rights Reserved.

See LICENSE at the repository root for terms of use, copying and distribution.
"""

import os

# Settings are read at import time, so the environment goes first
os.environ.setdefault('APP_ENV', 'test')

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from embnmt.app.autodiff.tape import set_default_dtype  # noqa: E402
from embnmt.app.models.params import init_params  # noqa: E402
from embnmt.app.schemas.corpus import ParallelCorpus, SentencePair, ToyCorpusSpec  # noqa: E402
from embnmt.app.schemas.training import TrainConfig  # noqa: E402
from embnmt.app.services.corpus import make_batch  # noqa: E402
from embnmt.app.services.embeddings import EmbeddingStore  # noqa: E402
from embnmt.app.services.vocab import Vocabulary  # noqa: E402


@pytest.fixture(autouse=True)
def float64_tensors():
    """Every test starts from double-precision tensors."""
    set_default_dtype('float64')
    yield
    set_default_dtype('float64')


@pytest.fixture()
def source_vocab() -> Vocabulary:
    return Vocabulary(['ich', 'du', 'sehe', 'den', 'hund', 'katze'])


@pytest.fixture()
def target_vocab() -> Vocabulary:
    return Vocabulary(['i', 'you', 'see', 'the', 'dog', 'cat'])


@pytest.fixture()
def tiny_config() -> TrainConfig:
    return TrainConfig(hidden_dim=4, embed_dim=3, dropout=0.0, batch_size=2, max_epochs=3, seed=3, learning_rate=0.01)


@pytest.fixture()
def tiny_params(source_vocab, target_vocab, tiny_config):
    return init_params(source_vocab.size, target_vocab.size, tiny_config)


@pytest.fixture()
def tiny_corpus() -> ParallelCorpus:
    pairs = [
        SentencePair(source=('ich', 'sehe', 'den', 'hund'), target=('i', 'see', 'the', 'dog')),
        SentencePair(source=('du', 'sehe', 'katze'), target=('you', 'see', 'cat')),
        SentencePair(source=('ich', 'sehe', 'katze'), target=('i', 'see', 'cat')),
        SentencePair(source=('du', 'sehe', 'den', 'hund'), target=('you', 'see', 'the', 'dog')),
    ]
    return ParallelCorpus(name='tiny', pairs=pairs)


@pytest.fixture()
def tiny_batch(tiny_corpus, source_vocab, target_vocab):
    # Two sentences of different lengths, so both sides carry padding
    return make_batch(tiny_corpus.pairs[:2], source_vocab, target_vocab)


@pytest.fixture()
def target_store(target_vocab) -> EmbeddingStore:
    """Deterministic store over the target vocabulary: 'dog' and 'cat' are close."""
    rng = np.random.default_rng(11)
    matrix = rng.normal(size=(target_vocab.size, 3))
    matrix[target_vocab.id_of('dog')] = [2.0, 0.0, 0.0]
    matrix[target_vocab.id_of('cat')] = [2.1, 0.1, 0.0]
    return EmbeddingStore(target_vocab, matrix, coverage=1.0)


@pytest.fixture()
def small_toy_spec() -> ToyCorpusSpec:
    return ToyCorpusSpec(clusters=4, cluster_size=3, min_len=2, max_len=4, train_size=40, valid_size=8, test_size=8, embed_dim=6)
