"""
Copyright ©2025. The Regents of the University of California (Regents). All Rights Reserved.

See LICENSE at the repository root for terms of use, copying and distribution.
"""

import pytest

from embnmt.app.core.errors import ContractViolation, VocabRangeError
from embnmt.app.services.vocab import (
    BOS,
    EOS,
    PAD,
    UNK,
    Vocabulary,
    annotate_oov,
    build_vocab,
    decode_ids,
    encode,
    load_vocab,
    save_vocab,
)


def test_specials_take_the_first_ids():
    v = Vocabulary(['a', 'b'])
    assert [v.word_of(i) for i in (PAD, UNK, BOS, EOS)] == ['<pad>', '<unk>', '<s>', '</s>']
    assert v.id_of('a') == 4
    assert v.size == 6
    assert v.words == ('a', 'b')
    assert '<unk>' not in v


def test_build_vocab_frequency_and_tie_order():
    """Test that frequency ranks first and ties keep first-occurrence order."""
    v = build_vocab([['b', 'a', 'a', 'c'], ['c', 'd']], max_size=7)
    assert v.words == ('a', 'c', 'b')


def test_build_vocab_minimum_size():
    with pytest.raises(ContractViolation):
        build_vocab([['a']], max_size=4)


def test_oov_maps_to_unk():
    v = Vocabulary(['a'])
    assert encode(v, ['a', 'zzz']) == [4, UNK]


def test_decode_drops_sentinels():
    v = Vocabulary(['a', 'b'])
    assert decode_ids(v, [BOS, 4, UNK, 5, EOS, PAD]) == ['a', '<unk>', 'b']


def test_decode_rejects_out_of_range():
    with pytest.raises(VocabRangeError):
        decode_ids(Vocabulary(['a']), [7])


def test_annotate_oov():
    assert annotate_oov(Vocabulary(['a']), ['a', 'b']) == ['a', '<unk:b>']


def test_duplicate_words_are_rejected():
    with pytest.raises(ContractViolation):
        Vocabulary(['a', 'a'])
    with pytest.raises(ContractViolation):
        Vocabulary(['<s>'])


def test_vocab_file_round_trip(tmp_path):
    v = build_vocab([['x', 'y', 'y']], max_size=10)
    path = tmp_path / 'vocab.tgt'
    save_vocab(v, path)
    # Line number is id - 4
    assert path.read_text(encoding='utf-8').splitlines() == ['y', 'x']
    assert load_vocab(path) == v
