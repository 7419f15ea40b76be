"""
Copyright ©2025. The Regents of the University of California (Regents). All Rights Reserved.

See LICENSE at the repository root for terms of use, copying and distribution.
"""

import hashlib
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from embnmt.app.core.config_manager import settings
from embnmt.app.core.errors import ConfigurationError, ContractViolation, EmbeddingFormatError, VocabRangeError
from embnmt.app.core.logger import logger
from embnmt.app.services.vocab import NUM_SPECIALS, UNK, Vocabulary


@dataclass(frozen=True)
class DistanceRow:
    ref_id: int
    distances: np.ndarray


class EmbeddingStore:
    """Frozen embedding table aligned row-for-row with a target vocabulary.

    Optionally keeps vectors of file words outside the vocabulary; those get
    extended ids starting at ``vocab.size`` and can only serve as references.
    """

    def __init__(
        self,
        vocab: Vocabulary,
        matrix: np.ndarray,
        coverage: float,
        extra_words: dict[str, np.ndarray] | None = None,
        distance_dtype: str = 'float64',
    ):
        if matrix.shape[0] != vocab.size:
            raise ContractViolation(f'embedding rows {matrix.shape[0]} != vocabulary size {vocab.size}')
        if not np.all(np.isfinite(matrix)):
            raise ContractViolation('embedding matrix contains non-finite values')
        self.vocab = vocab
        self.matrix = np.array(matrix, dtype=np.float64)
        self.matrix.setflags(write=False)
        self.coverage = coverage
        self.distance_dtype = np.dtype(distance_dtype)

        extra_words = extra_words or {}
        self._extra_ids = {word: vocab.size + i for i, word in enumerate(extra_words)}
        width = self.matrix.shape[1]
        self._extra_matrix = np.array(list(extra_words.values()), dtype=np.float64).reshape(len(extra_words), width)
        self._extra_matrix.setflags(write=False)

        self._cache: dict[int, DistanceRow] = {}
        self._lock = threading.Lock()
        self._full: np.ndarray | None = None

    @property
    def embed_dim(self) -> int:
        return self.matrix.shape[1]

    @property
    def vocab_size(self) -> int:
        return self.matrix.shape[0]

    @property
    def reference_count(self) -> int:
        """Vocabulary rows plus retained out-of-vocabulary rows."""
        return self.vocab_size + len(self._extra_ids)

    def vector(self, ref_id: int) -> np.ndarray:
        if 0 <= ref_id < self.vocab_size:
            return self.matrix[ref_id]
        if self.vocab_size <= ref_id < self.reference_count:
            return self._extra_matrix[ref_id - self.vocab_size]
        raise VocabRangeError(f'reference id {ref_id} outside [0, {self.reference_count})')

    def reference_id(self, word: str) -> int:
        """Vocabulary id, else the extended id of a retained OOV vector, else UNK."""
        idx = self.vocab.id_of(word)
        if idx != UNK:
            return idx
        return self._extra_ids.get(word, UNK)

    def cached_rows(self) -> int:
        return len(self._cache)


def load_text_embeddings(path: str | Path) -> dict[str, np.ndarray]:
    """Parse the textual word2vec export: ``<count> <dim>`` then ``<word> <v1> ... <vdim>``."""
    with open(path, encoding='utf-8') as f:
        lines = f.read().split('\n')
    if lines and lines[-1] == '':
        lines.pop()
    if not lines:
        raise EmbeddingFormatError('empty embedding file', 1)

    header = lines[0].split(' ')
    if len(header) != 2 or not all(part.isdigit() for part in header):
        raise EmbeddingFormatError(f'header must be "<count> <dim>", got {lines[0]!r}', 1)
    count, dim = int(header[0]), int(header[1])
    if dim < 1:
        raise EmbeddingFormatError('dimension must be positive', 1)

    table: dict[str, np.ndarray] = {}
    duplicates = 0
    for line_number, line in enumerate(lines[1:], start=2):
        fields = line.split()
        if len(fields) != dim + 1:
            raise EmbeddingFormatError(f'expected word plus {dim} values, got {len(fields) - 1} values', line_number)
        word = fields[0]
        try:
            vector = np.array([float(value) for value in fields[1:]], dtype=np.float64)
        except ValueError:
            raise EmbeddingFormatError(f'non-numeric value in vector of {word!r}', line_number)
        if not np.all(np.isfinite(vector)):
            raise EmbeddingFormatError(f'non-finite value in vector of {word!r}', line_number)
        if word in table:
            duplicates += 1
            continue
        table[word] = vector

    if len(lines) - 1 != count:
        raise EmbeddingFormatError(f'header announces {count} vectors but the file holds {len(lines) - 1}', 1)
    if duplicates:
        logger.warning(f'{duplicates} duplicate word lines in {path}; first occurrences kept')
    logger.info(f'Loaded {len(table)} vectors of dimension {dim} from {path}')
    return table


def write_text_embeddings(table: dict[str, np.ndarray], path: str | Path) -> None:
    dim = len(next(iter(table.values()))) if table else 0
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(f'{len(table)} {dim}\n')
        for word, vector in table.items():
            f.write(word + ' ' + ' '.join(repr(float(v)) for v in vector) + '\n')


def _word_rng(seed: int, word: str) -> np.random.Generator:
    digest = hashlib.sha256(word.encode('utf-8')).digest()
    return np.random.default_rng([seed, int.from_bytes(digest[:8], 'little')])


def align_to_vocab(
    raw: dict[str, np.ndarray],
    v: Vocabulary,
    seed: int,
    keep_oov: bool = False,
    distance_dtype: str = 'float64',
) -> EmbeddingStore:
    """Lay out one row per vocabulary id.

    Found words are copied verbatim. Missing words (BOS, EOS, PAD included) get a
    per-word pseudo-random direction scaled to the mean norm of found vectors; UNK
    gets the mean of the found vectors.
    """
    if not raw:
        raise ContractViolation('cannot align an empty embedding table')
    dim = len(next(iter(raw.values())))
    matrix = np.zeros((v.size, dim), dtype=np.float64)
    found = np.zeros(v.size, dtype=bool)
    for idx in range(NUM_SPECIALS, v.size):
        vector = raw.get(v.word_of(idx))
        if vector is not None:
            matrix[idx] = vector
            found[idx] = True

    if found.any():
        found_rows = matrix[found]
        mean_vector = found_rows.mean(axis=0)
        mean_norm = float(np.linalg.norm(found_rows, axis=1).mean())
    else:
        logger.warning('No vocabulary word found in the embedding table; using the table mean')
        table_rows = np.stack(list(raw.values()))
        mean_vector = table_rows.mean(axis=0)
        mean_norm = float(np.linalg.norm(table_rows, axis=1).mean())

    for idx in range(v.size):
        if found[idx]:
            continue
        if idx == UNK:
            matrix[idx] = mean_vector
            continue
        direction = _word_rng(seed, v.word_of(idx)).normal(size=dim)
        matrix[idx] = mean_norm * direction / np.linalg.norm(direction)

    corpus_words = v.size - NUM_SPECIALS
    coverage = float(found.sum()) / corpus_words if corpus_words else 0.0
    extra = {word: vector for word, vector in raw.items() if word not in v} if keep_oov else None
    logger.info(f'Aligned embeddings: coverage {coverage:.3f} of {corpus_words} vocabulary words')
    return EmbeddingStore(v, matrix, coverage, extra_words=extra, distance_dtype=distance_dtype)


def distance(s: np.ndarray, t: np.ndarray) -> float:
    """Euclidean distance ||s - t||."""
    s, t = np.asarray(s, dtype=np.float64), np.asarray(t, dtype=np.float64)
    if s.shape != t.shape:
        raise ContractViolation(f'distance: dimension mismatch {s.shape} vs {t.shape}')
    return float(np.linalg.norm(s - t))


def _distances_to(matrix: np.ndarray, reference: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum((matrix - reference) ** 2, axis=1))


def distance_row(store: EmbeddingStore, ref_id: int) -> DistanceRow:
    """Distances from the reference's vector to every vocabulary row, cached per reference."""
    ref_id = int(ref_id)
    cached = store._cache.get(ref_id)
    if cached is not None:
        return cached
    reference = store.vector(ref_id)
    if store._full is not None and ref_id < store.vocab_size:
        distances = store._full[ref_id]
    else:
        distances = _distances_to(store.matrix, reference).astype(store.distance_dtype)
        if ref_id < store.vocab_size:
            distances[ref_id] = 0.0
    distances.setflags(write=False)
    row = DistanceRow(ref_id, distances)
    with store._lock:
        # First writer wins so every caller observes the same array
        return store._cache.setdefault(ref_id, row)


def distance_matrix(store: EmbeddingStore, ref_ids: np.ndarray) -> np.ndarray:
    """Stack distance rows for an id array of any shape: result shape ``ref_ids.shape + (K,)``."""
    flat = np.asarray(ref_ids, dtype=np.int64).reshape(-1)
    rows = {int(r): distance_row(store, int(r)).distances for r in np.unique(flat)}
    stacked = np.stack([rows[int(r)] for r in flat]) if flat.size else np.zeros((0, store.vocab_size))
    return stacked.astype(np.float64).reshape((*np.shape(ref_ids), store.vocab_size))


def precompute_distances(store: EmbeddingStore, limit: int | None = None) -> None:
    """Materialize the full K x K table (only for small vocabularies)."""
    limit = settings.DISTANCE_CACHE_PRECOMPUTE_LIMIT if limit is None else limit
    if store.vocab_size > limit:
        raise ConfigurationError(f'vocabulary of {store.vocab_size} exceeds the precompute limit {limit}')
    # Same arithmetic as distance_row
    full = np.stack([_distances_to(store.matrix, vector) for vector in store.matrix])
    np.fill_diagonal(full, 0.0)
    store._full = full.astype(store.distance_dtype)
    logger.info(f'Precomputed {store.vocab_size}x{store.vocab_size} distance table')


def nearest_neighbors(store: EmbeddingStore, word_id: int, k: int) -> list[int]:
    """The k closest non-special vocabulary ids (word_id excluded), ties to the smaller id."""
    if k < 1:
        raise ContractViolation(f'k must be positive, got {k}')
    distances = distance_row(store, word_id).distances.astype(np.float64)
    candidates = [idx for idx in range(NUM_SPECIALS, store.vocab_size) if idx != word_id]
    candidates.sort(key=lambda idx: (distances[idx], idx))
    return candidates[:k]
