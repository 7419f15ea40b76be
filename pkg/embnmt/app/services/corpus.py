"""
Copyright ©2025. The Regents of the University of California (Regents). All Rights Reserved.

See LICENSE at the repository root for terms of use, copying and distribution.
"""

from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from embnmt.app.core.errors import CorpusStructureError, EmbNmtError
from embnmt.app.core.logger import logger
from embnmt.app.schemas.corpus import ParallelCorpus, SentencePair
from embnmt.app.services.vocab import BOS, EOS, PAD, Vocabulary, encode


@dataclass(frozen=True)
class Batch:
    """Padded id matrices for one minibatch.

    Target rows are ``BOS y_1 ... y_I EOS`` followed by padding; the source side
    carries no sentinels. ``target_ref_ids`` equals ``target_ids`` except where an
    OOV reference word has its own embedding row (see embeddings).
    """

    source_ids: np.ndarray
    source_mask: np.ndarray
    target_ids: np.ndarray
    target_mask: np.ndarray
    target_ref_ids: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.target_ref_ids is None:
            object.__setattr__(self, 'target_ref_ids', self.target_ids)
        for array in (self.source_ids, self.source_mask, self.target_ids, self.target_mask, self.target_ref_ids):
            array.setflags(write=False)

    @property
    def size(self) -> int:
        return self.source_ids.shape[0]

    @property
    def decoder_inputs(self) -> np.ndarray:
        return self.target_ids[:, :-1]

    @property
    def decoder_targets(self) -> np.ndarray:
        return self.target_ids[:, 1:]

    @property
    def decoder_ref_targets(self) -> np.ndarray:
        return self.target_ref_ids[:, 1:]

    @property
    def decoder_mask(self) -> np.ndarray:
        return self.target_mask[:, 1:]


def _read_lines(path: str | Path) -> list[str]:
    try:
        with open(path, encoding='utf-8') as f:
            return f.read().splitlines()
    except UnicodeDecodeError as e:
        raise EmbNmtError(f'{path} is not valid UTF-8: {e}')


def load_parallel(source_path: str | Path, target_path: str | Path, name: str | None = None) -> ParallelCorpus:
    """Pair line i of the source file with line i of the target file."""
    source_lines = _read_lines(source_path)
    target_lines = _read_lines(target_path)
    if len(source_lines) != len(target_lines):
        raise CorpusStructureError(f'line count mismatch {len(source_lines)} vs {len(target_lines)}')

    pairs = []
    dropped = 0
    for source_line, target_line in zip(source_lines, target_lines, strict=True):
        source, target = source_line.split(), target_line.split()
        if not source or not target:
            dropped += 1
            continue
        pairs.append(SentencePair(source=tuple(source), target=tuple(target)))
    if dropped:
        logger.warning(f'Dropped {dropped} pairs with an empty side from {source_path} / {target_path}')
    return ParallelCorpus(name=name or Path(source_path).stem, pairs=pairs)


def write_parallel(corpus: ParallelCorpus, source_path: str | Path, target_path: str | Path) -> None:
    for path, side in ((source_path, corpus.sources()), (target_path, corpus.targets())):
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8', newline='\n') as f:
            f.writelines(' '.join(tokens) + '\n' for tokens in side)


def filter_by_length(corpus: ParallelCorpus, max_tokens: int) -> ParallelCorpus:
    """Keep pairs whose source and target both have at most ``max_tokens`` tokens."""
    if max_tokens < 1:
        raise ValueError(f'max_tokens must be positive, got {max_tokens}')
    kept = [pair for pair in corpus.pairs if len(pair.source) <= max_tokens and len(pair.target) <= max_tokens]
    if len(kept) != len(corpus.pairs):
        logger.info(f'Length filter {max_tokens}: kept {len(kept)} of {len(corpus.pairs)} pairs in {corpus.name}')
    return ParallelCorpus(name=corpus.name, pairs=kept)


def _pad(rows: Sequence[Sequence[int]]) -> tuple[np.ndarray, np.ndarray]:
    width = max(len(row) for row in rows)
    ids = np.full((len(rows), width), PAD, dtype=np.int64)
    mask = np.zeros((len(rows), width), dtype=np.float64)
    for i, row in enumerate(rows):
        ids[i, : len(row)] = row
        mask[i, : len(row)] = 1.0
    return ids, mask


def make_batch(
    pairs: Sequence[SentencePair],
    vocab_src: Vocabulary,
    vocab_tgt: Vocabulary,
    reference_id: Callable[[str], int] | None = None,
) -> Batch:
    source_ids, source_mask = _pad([encode(vocab_src, pair.source) for pair in pairs])
    target_ids, target_mask = _pad([[BOS, *encode(vocab_tgt, pair.target), EOS] for pair in pairs])
    target_ref_ids = None
    if reference_id is not None:
        target_ref_ids, _ = _pad([[BOS, *(reference_id(token) for token in pair.target), EOS] for pair in pairs])
    return Batch(source_ids, source_mask, target_ids, target_mask, target_ref_ids)


def make_batches(
    corpus: ParallelCorpus,
    vocab_src: Vocabulary,
    vocab_tgt: Vocabulary,
    batch_size: int,
    shuffle_seed: int | None = None,
    reference_id: Callable[[str], int] | None = None,
) -> list[Batch]:
    """Chunk a corpus into padded batches.

    Pairs are sorted by target length (stable) before chunking; with a seed the
    batch order is then shuffled deterministically. OOV tokens become UNK.
    """
    if batch_size < 1:
        raise ValueError(f'batch_size must be positive, got {batch_size}')
    if not corpus.pairs:
        return []
    ordered = sorted(corpus.pairs, key=lambda pair: len(pair.target))
    batches = [
        make_batch(ordered[start : start + batch_size], vocab_src, vocab_tgt, reference_id) for start in range(0, len(ordered), batch_size)
    ]
    if shuffle_seed is not None:
        order = np.random.default_rng(shuffle_seed).permutation(len(batches))
        batches = [batches[i] for i in order]
    return batches
