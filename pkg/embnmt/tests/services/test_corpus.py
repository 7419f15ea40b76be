"""
Copyright ©2025. The Regents of the University of California (Regents). All Rights Reserved.

See LICENSE at the repository root for terms of use, copying and distribution.
"""

import numpy as np
import pytest
from pydantic import ValidationError

from embnmt.app.core.errors import CorpusStructureError
from embnmt.app.schemas.corpus import SentencePair
from embnmt.app.services.corpus import filter_by_length, load_parallel, make_batch, make_batches, write_parallel
from embnmt.app.services.vocab import BOS, EOS, PAD, UNK


def _write(path, lines):
    path.write_text(''.join(line + '\n' for line in lines), encoding='utf-8')


def test_load_parallel_pairs_lines(tmp_path):
    _write(tmp_path / 'a.src', ['ich sehe', 'du'])
    _write(tmp_path / 'a.tgt', ['i see', 'you'])
    corpus = load_parallel(tmp_path / 'a.src', tmp_path / 'a.tgt')
    assert corpus.name == 'a'
    assert corpus.pairs[0] == SentencePair(source=('ich', 'sehe'), target=('i', 'see'))


def test_load_parallel_rejects_mismatched_lengths(tmp_path):
    _write(tmp_path / 'a.src', ['x', 'y'])
    _write(tmp_path / 'a.tgt', ['x'])
    with pytest.raises(CorpusStructureError):
        load_parallel(tmp_path / 'a.src', tmp_path / 'a.tgt')


def test_load_parallel_drops_empty_sides(tmp_path, caplog):
    _write(tmp_path / 'a.src', ['x', '', 'z'])
    _write(tmp_path / 'a.tgt', ['x', 'y', 'z'])
    corpus = load_parallel(tmp_path / 'a.src', tmp_path / 'a.tgt')
    assert len(corpus) == 2
    assert 'Dropped 1 pairs' in caplog.text


def test_write_parallel_round_trip(tmp_path, tiny_corpus):
    write_parallel(tiny_corpus, tmp_path / 'out' / 't.src', tmp_path / 'out' / 't.tgt')
    again = load_parallel(tmp_path / 'out' / 't.src', tmp_path / 'out' / 't.tgt')
    assert again.pairs == tiny_corpus.pairs


def test_sentence_pair_validation():
    with pytest.raises(ValidationError):
        SentencePair(source=(), target=('a',))
    with pytest.raises(ValidationError):
        SentencePair(source=('a b',), target=('a',))


def test_filter_by_length(tiny_corpus):
    kept = filter_by_length(tiny_corpus, 3)
    assert [len(p.source) for p in kept.pairs] == [3, 3]


def test_make_batch_layout(tiny_corpus, source_vocab, target_vocab):
    """Test that targets are framed by BOS/EOS and that masks cover exactly the real tokens."""
    batch = make_batch(tiny_corpus.pairs[:2], source_vocab, target_vocab)
    assert batch.source_ids.shape == (2, 4)
    assert batch.target_ids[1].tolist() == [BOS, target_vocab.id_of('you'), target_vocab.id_of('see'), target_vocab.id_of('cat'), EOS, PAD]
    assert batch.target_mask[1].tolist() == [1, 1, 1, 1, 1, 0]
    assert batch.source_mask.sum() == 7
    assert batch.decoder_targets.shape == batch.decoder_inputs.shape == batch.decoder_mask.shape
    assert np.array_equal(batch.target_ref_ids, batch.target_ids)
    with pytest.raises(ValueError):
        batch.source_ids[0, 0] = 3


def test_make_batch_unknown_words(source_vocab, target_vocab):
    batch = make_batch([SentencePair(source=('nie',), target=('never',))], source_vocab, target_vocab)
    assert batch.source_ids[0, 0] == UNK
    assert batch.target_ids[0, 1] == UNK


def test_make_batch_reference_ids(source_vocab, target_vocab):
    """Test that a reference lookup can give OOV target words their own ids."""
    lookup = {'never': 42}
    batch = make_batch(
        [SentencePair(source=('nie',), target=('never', 'dog'))],
        source_vocab,
        target_vocab,
        reference_id=lambda word: lookup.get(word, target_vocab.id_of(word)),
    )
    assert batch.target_ids[0, 1] == UNK
    assert batch.decoder_ref_targets[0].tolist() == [42, target_vocab.id_of('dog'), EOS]


def test_make_batches_sorting_and_shuffle(tiny_corpus, source_vocab, target_vocab):
    batches = make_batches(tiny_corpus, source_vocab, target_vocab, batch_size=2)
    assert [b.target_ids.shape[1] for b in batches] == [5, 6]
    shuffled = make_batches(tiny_corpus, source_vocab, target_vocab, batch_size=1, shuffle_seed=4)
    again = make_batches(tiny_corpus, source_vocab, target_vocab, batch_size=1, shuffle_seed=4)
    assert [b.source_ids.tolist() for b in shuffled] == [b.source_ids.tolist() for b in again]
    assert sum(b.size for b in shuffled) == len(tiny_corpus)
