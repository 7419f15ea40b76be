"""
Copyright ©2025. The Regents of the University of California (Regents). All Rights Reserved.

See LICENSE at the repository root for terms of use, copying and distribution.
"""

from collections import Counter
from collections.abc import Iterable, Sequence
from pathlib import Path

from embnmt.app.core.errors import ContractViolation, VocabRangeError
from embnmt.app.core.logger import logger

PAD, UNK, BOS, EOS = 0, 1, 2, 3
PAD_TOKEN = '<pad>'
UNK_TOKEN = '<unk>'
BOS_TOKEN = '<s>'
EOS_TOKEN = '</s>'
SPECIAL_TOKENS = (PAD_TOKEN, UNK_TOKEN, BOS_TOKEN, EOS_TOKEN)
NUM_SPECIALS = len(SPECIAL_TOKENS)


class Vocabulary:
    """Immutable word <-> id map; ids 0-3 are PAD, UNK, BOS, EOS."""

    def __init__(self, words: Sequence[str]):
        self._word_of: tuple[str, ...] = SPECIAL_TOKENS + tuple(words)
        self._id_of = {word: idx for idx, word in enumerate(self._word_of)}
        if len(self._id_of) != len(self._word_of):
            raise ContractViolation('vocabulary words must be distinct and must not repeat special tokens')

    @property
    def size(self) -> int:
        return len(self._word_of)

    def __len__(self) -> int:
        return self.size

    def __contains__(self, word: str) -> bool:
        return word in self._id_of and self._id_of[word] >= NUM_SPECIALS

    @property
    def words(self) -> tuple[str, ...]:
        """Corpus words in id order, specials excluded."""
        return self._word_of[NUM_SPECIALS:]

    def id_of(self, word: str) -> int:
        return self._id_of.get(word, UNK)

    def word_of(self, idx: int) -> str:
        if not 0 <= idx < self.size:
            raise VocabRangeError(f'id {idx} outside vocabulary of size {self.size}')
        return self._word_of[idx]

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self._word_of == other._word_of

    def __hash__(self) -> int:
        return hash(self._word_of)

    def __repr__(self) -> str:
        return f'Vocabulary(size={self.size})'


def build_vocab(sentences: Iterable[Sequence[str]], max_size: int) -> Vocabulary:
    """Keep the ``max_size - 4`` most frequent words; ties go to the earlier first occurrence."""
    if max_size < NUM_SPECIALS + 1:
        raise ContractViolation(f'max_size must be at least {NUM_SPECIALS + 1}, got {max_size}')
    counts = Counter()
    for tokens in sentences:
        counts.update(tokens)
    # Counter keeps first-insertion order and most_common sorts stably
    kept = [word for word, _ in counts.most_common(max_size - NUM_SPECIALS)]
    logger.debug(f'Built vocabulary: {len(kept)} of {len(counts)} distinct words kept')
    return Vocabulary(kept)


def encode(v: Vocabulary, tokens: Sequence[str]) -> list[int]:
    return [v.id_of(token) for token in tokens]


def decode_ids(v: Vocabulary, ids: Iterable[int]) -> list[str]:
    """Surface tokens for ids; BOS, EOS and PAD are dropped and UNK renders as ``<unk>``."""
    tokens = []
    for idx in ids:
        word = v.word_of(int(idx))
        if idx in (PAD, BOS, EOS):
            continue
        tokens.append(word)
    return tokens


def annotate_oov(v: Vocabulary, tokens: Sequence[str]) -> list[str]:
    """Render out-of-vocabulary tokens as ``<unk:word>``."""
    return [token if token in v else f'<unk:{token}>' for token in tokens]


def format_vocab(v: Vocabulary) -> str:
    # One word per line, line number = id - 4; specials are implicit.
    return ''.join(f'{word}\n' for word in v.words)


def parse_vocab(text: str) -> Vocabulary:
    return Vocabulary([line for line in text.splitlines() if line])


def save_vocab(v: Vocabulary, path: str | Path) -> None:
    Path(path).write_text(format_vocab(v), encoding='utf-8')


def load_vocab(path: str | Path) -> Vocabulary:
    return parse_vocab(Path(path).read_text(encoding='utf-8'))
