"""
Copyright ©2025. The Regents of the University of California (Regents). All Rights Reserved.

See LICENSE at the repository root for terms of use, copying and distribution.
"""

from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from embnmt.app.core.errors import ConfigurationError, ContractViolation, EmbeddingFormatError, VocabRangeError
from embnmt.app.services.embeddings import (
    EmbeddingStore,
    align_to_vocab,
    distance,
    distance_matrix,
    distance_row,
    load_text_embeddings,
    nearest_neighbors,
    precompute_distances,
    write_text_embeddings,
)
from embnmt.app.services.vocab import BOS, UNK, Vocabulary


@pytest.fixture()
def line_vocab() -> Vocabulary:
    return Vocabulary(['a', 'b', 'c', 'd'])


@pytest.fixture()
def line_store(line_vocab) -> EmbeddingStore:
    """Specials far away, corpus words on a line at 0, 1, 3, 7."""
    matrix = np.array([[100.0], [200.0], [300.0], [400.0], [0.0], [1.0], [3.0], [7.0]])
    return EmbeddingStore(line_vocab, matrix, coverage=1.0)


def _write(path, text):
    path.write_text(text, encoding='utf-8')
    return path


# Loading


def test_load_text_embeddings(tmp_path):
    path = _write(tmp_path / 'e.txt', '2 3\ncat 0.1 0.2 0.3\ndog -1 0 1e-2\n')
    table = load_text_embeddings(path)
    assert list(table) == ['cat', 'dog']
    assert np.allclose(table['dog'], [-1.0, 0.0, 0.01])


def test_duplicate_words_keep_first(tmp_path, caplog):
    path = _write(tmp_path / 'e.txt', '2 1\ncat 1\ncat 2\n')
    assert load_text_embeddings(path)['cat'][0] == 1.0
    assert 'duplicate' in caplog.text


@pytest.mark.parametrize(
    'text, line',
    [
        ('', 1),
        ('2\ncat 1\n', 1),
        ('1 2\ncat 1\n', 2),
        ('1 2\ncat 1 x\n', 2),
        ('2 1\ncat 1\ndog nan\n', 3),
        ('3 1\ncat 1\ndog 2\n', 1),
    ],
)
def test_malformed_files_report_line(tmp_path, text, line):
    path = _write(tmp_path / 'bad.txt', text)
    with pytest.raises(EmbeddingFormatError) as excinfo:
        load_text_embeddings(path)
    assert excinfo.value.line_number == line


def test_write_then_load(tmp_path):
    table = {'x': np.array([0.1, -2.5]), 'y': np.array([1e-7, 3.0])}
    write_text_embeddings(table, tmp_path / 'e.txt')
    loaded = load_text_embeddings(tmp_path / 'e.txt')
    assert all(np.array_equal(loaded[w], table[w]) for w in table)


# Alignment


def test_align_copies_found_and_fills_missing(line_vocab):
    raw = {'a': np.array([1.0, 0.0]), 'b': np.array([0.0, 3.0]), 'zzz': np.array([5.0, 5.0])}
    store = align_to_vocab(raw, line_vocab, seed=1)
    assert np.array_equal(store.vector(line_vocab.id_of('a')), [1.0, 0.0])
    # UNK is the mean of the found vectors
    assert np.allclose(store.vector(UNK), [0.5, 1.5])
    # Missing words get random directions at the mean found norm (2.0)
    assert np.linalg.norm(store.vector(line_vocab.id_of('c'))) == pytest.approx(2.0)
    assert np.linalg.norm(store.vector(BOS)) == pytest.approx(2.0)
    assert store.coverage == pytest.approx(0.5)
    assert store.reference_count == store.vocab_size


def test_align_is_seeded(line_vocab):
    raw = {'a': np.array([1.0, 0.0, 0.0])}
    first = align_to_vocab(raw, line_vocab, seed=3)
    assert np.array_equal(first.matrix, align_to_vocab(raw, line_vocab, seed=3).matrix)
    assert not np.array_equal(first.matrix, align_to_vocab(raw, line_vocab, seed=4).matrix)


def test_align_keeps_oov_vectors_on_request(line_vocab):
    raw = {'a': np.array([1.0]), 'rare': np.array([9.0])}
    store = align_to_vocab(raw, line_vocab, seed=1, keep_oov=True)
    rare = store.reference_id('rare')
    assert rare == line_vocab.size
    assert store.vector(rare)[0] == 9.0
    assert store.reference_id('unseen') == UNK
    with pytest.raises(VocabRangeError):
        store.vector(rare + 1)


def test_align_rejects_empty_table(line_vocab):
    with pytest.raises(ContractViolation):
        align_to_vocab({}, line_vocab, seed=1)


# Distances


def test_distance():
    assert distance(np.array([0.0, 0.0]), np.array([3.0, 4.0])) == 5.0
    with pytest.raises(ContractViolation):
        distance(np.zeros(2), np.zeros(3))


def test_distance_row_is_cached_and_read_only(line_store):
    row = distance_row(line_store, 5)
    assert row.distances[4:].tolist() == [1.0, 0.0, 2.0, 6.0]
    assert distance_row(line_store, 5) is row
    assert line_store.cached_rows() == 1
    with pytest.raises(ValueError):
        row.distances[0] = 1.0


def test_distance_matrix_shape(line_store):
    ids = np.array([[4, 5, 0], [7, 7, 6]])
    table = distance_matrix(line_store, ids)
    assert table.shape == (2, 3, 8)
    assert table[1, 0, 4] == 7.0


def test_concurrent_readers_share_rows(line_store):
    """Test that concurrent first requests for a row all end up with the same array."""
    with ThreadPoolExecutor(max_workers=4) as pool:
        rows = list(pool.map(lambda _: distance_row(line_store, 6), range(16)))
    assert all(row is rows[0] for row in rows)


def test_precompute_matches_lazy_rows(line_store, line_vocab):
    lazy = np.stack([distance_row(EmbeddingStore(line_vocab, line_store.matrix, 1.0), i).distances for i in range(8)])
    precompute_distances(line_store, limit=10)
    full = np.stack([distance_row(line_store, i).distances for i in range(8)])
    assert np.allclose(full, lazy)
    assert np.array_equal(full, full.T)
    assert np.all(np.diag(full) == 0.0)


@pytest.mark.parametrize('dtype', ['float64', 'float32'])
def test_precomputed_rows_equal_lazy_rows_exactly(dtype):
    """Test that a row does not depend on whether it was read before or after precomputing."""
    vocab = Vocabulary([f'w{i}' for i in range(40)])
    # Large offsets with small spreads, where a Gram-form table would round differently
    matrix = 1e3 + np.random.default_rng(3).normal(scale=1e-3, size=(vocab.size, 16))
    lazy_store = EmbeddingStore(vocab, matrix, 1.0, distance_dtype=dtype)
    full_store = EmbeddingStore(vocab, matrix, 1.0, distance_dtype=dtype)
    precompute_distances(full_store, limit=vocab.size)
    for ref_id in range(vocab.size):
        assert np.array_equal(distance_row(lazy_store, ref_id).distances, distance_row(full_store, ref_id).distances)


def test_precompute_limit(line_store):
    with pytest.raises(ConfigurationError):
        precompute_distances(line_store, limit=4)


def test_float32_distance_rows(line_vocab, line_store):
    store = EmbeddingStore(line_vocab, line_store.matrix, 1.0, distance_dtype='float32')
    assert distance_row(store, 4).distances.dtype == np.float32
    # The loss always sees double precision
    assert distance_matrix(store, np.array([4])).dtype == np.float64


# Neighbors


def test_nearest_neighbors_skip_specials_and_self(line_store):
    assert nearest_neighbors(line_store, 5, 2) == [4, 6]
    assert nearest_neighbors(line_store, 7, 3) == [6, 5, 4]


def test_nearest_neighbors_tie_goes_to_smaller_id(line_vocab):
    matrix = np.array([[50.0], [60.0], [70.0], [80.0], [-1.0], [0.0], [1.0], [9.0]])
    store = EmbeddingStore(line_vocab, matrix, 1.0)
    assert nearest_neighbors(store, 5, 1) == [4]


def test_store_rejects_bad_matrix(line_vocab):
    with pytest.raises(ContractViolation):
        EmbeddingStore(line_vocab, np.zeros((3, 2)), 1.0)
    bad = np.zeros((8, 1))
    bad[2, 0] = np.inf
    with pytest.raises(ContractViolation):
        EmbeddingStore(line_vocab, bad, 1.0)
