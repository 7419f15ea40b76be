"""
Copyright ©2025. The Regents of the University of California (Regents). All Rights Reserved.

See LICENSE at the repository root for terms of use, copying and distribution.
"""

"""Synthetic synonym-cluster translation task.

Each target cluster holds ``cluster_size`` synonyms of decreasing frequency. Every
source word translates to exactly one synonym, in place, so truncating the target
vocabulary by frequency turns the rarest synonym of each cluster into UNK while
its source word stays predictable. The emitted target embeddings put synonyms
closer to each other than to any word of another cluster.
"""

import string
from pathlib import Path

import numpy as np

from embnmt.app.core.errors import EmbNmtError
from embnmt.app.core.logger import logger
from embnmt.app.schemas.corpus import ParallelCorpus, SentencePair, ToyCorpusSpec
from embnmt.app.services.corpus import write_parallel
from embnmt.app.services.vocab import NUM_SPECIALS

CLUSTER_RADIUS = 1.0
# Centers sit at least this far apart, so any inter-cluster pair is > 4r + margin - 2r
CENTER_SEPARATION = 4 * CLUSTER_RADIUS + 1.0
MAX_PLACEMENT_ATTEMPTS = 10_000
SPLITS = ('train', 'valid', 'test')


def _rank_label(rank: int) -> str:
    return string.ascii_lowercase[rank] if rank < 26 else f'r{rank}'


def target_word(cluster: int, rank: int) -> str:
    return f'w{cluster:02d}{_rank_label(rank)}'


def source_word(cluster: int, rank: int) -> str:
    return f'src{cluster:02d}{_rank_label(rank)}'


def oov_truncated_vocab_size(spec: ToyCorpusSpec) -> int:
    """Target vocabulary size that leaves exactly the rarest synonym of each cluster out."""
    return NUM_SPECIALS + spec.clusters * (spec.cluster_size - 1)


def _sentence(spec: ToyCorpusSpec, weights: np.ndarray, rng: np.random.Generator) -> SentencePair:
    length = int(rng.integers(spec.min_len, spec.max_len + 1))
    clusters = rng.integers(0, spec.clusters, size=length)
    ranks = rng.choice(spec.cluster_size, size=length, p=weights)
    source = tuple(source_word(int(c), int(r)) for c, r in zip(clusters, ranks, strict=True))
    target = tuple(target_word(int(c), int(r)) for c, r in zip(clusters, ranks, strict=True))
    return SentencePair(source=source, target=target)


def _place_centers(spec: ToyCorpusSpec, rng: np.random.Generator) -> np.ndarray:
    radius = 10.0 * max(1.0, spec.clusters ** (1.0 / spec.embed_dim))
    centers: list[np.ndarray] = []
    attempts = 0
    while len(centers) < spec.clusters:
        attempts += 1
        if attempts > MAX_PLACEMENT_ATTEMPTS:
            raise EmbNmtError(f'cannot separate {spec.clusters} clusters in {spec.embed_dim} dimensions')
        direction = rng.normal(size=spec.embed_dim)
        candidate = radius * direction / np.linalg.norm(direction)
        if all(np.linalg.norm(candidate - other) >= CENTER_SEPARATION for other in centers):
            centers.append(candidate)
    return np.stack(centers)


def _cluster_vectors(spec: ToyCorpusSpec, rng: np.random.Generator) -> dict[str, np.ndarray]:
    centers = _place_centers(spec, rng)
    vectors = {}
    for cluster in range(spec.clusters):
        for rank in range(spec.cluster_size):
            offset = rng.normal(size=spec.embed_dim)
            offset *= rng.uniform(0.0, CLUSTER_RADIUS) / np.linalg.norm(offset)
            # Round now so the written file and the verification see the same numbers
            vectors[target_word(cluster, rank)] = np.round(centers[cluster] + offset, 6)
    return vectors


def cluster_separation(vectors: dict[str, np.ndarray], cluster_of: dict[str, int]) -> tuple[float, float]:
    """(max intra-cluster distance, min inter-cluster distance) by exhaustive pairwise scan."""
    words = list(vectors)
    max_intra, min_inter = 0.0, float('inf')
    for i, a in enumerate(words):
        for b in words[i + 1 :]:
            d = float(np.linalg.norm(vectors[a] - vectors[b]))
            if cluster_of[a] == cluster_of[b]:
                max_intra = max(max_intra, d)
            else:
                min_inter = min(min_inter, d)
    return max_intra, min_inter


def format_embeddings(vectors: dict[str, np.ndarray]) -> str:
    dim = len(next(iter(vectors.values())))
    lines = [f'{len(vectors)} {dim}']
    lines += [word + ' ' + ' '.join(f'{value:.6f}' for value in vector) for word, vector in vectors.items()]
    return '\n'.join(lines) + '\n'


def generate_toy_corpus(spec: ToyCorpusSpec, seed: int) -> tuple[ParallelCorpus, ParallelCorpus, ParallelCorpus, str]:
    """Train/valid/test corpora plus the target-side embedding file text."""
    rng = np.random.default_rng(seed)
    weights = np.asarray(spec.rank_weights())
    sizes = {'train': spec.train_size, 'valid': spec.valid_size, 'test': spec.test_size}
    corpora = [ParallelCorpus(name=split, pairs=[_sentence(spec, weights, rng) for _ in range(sizes[split])]) for split in SPLITS]

    vectors = _cluster_vectors(spec, rng)
    cluster_of = {target_word(c, r): c for c in range(spec.clusters) for r in range(spec.cluster_size)}
    if spec.clusters > 1 and spec.cluster_size > 1:
        max_intra, min_inter = cluster_separation(vectors, cluster_of)
        if not max_intra < min_inter:
            raise EmbNmtError(f'generated clusters overlap: intra {max_intra:.4f} >= inter {min_inter:.4f}')
    logger.info(f'Generated toy corpus: {spec.clusters} clusters x {spec.cluster_size} synonyms, sizes {sizes}')
    return corpora[0], corpora[1], corpora[2], format_embeddings(vectors)


def write_toy_corpus(spec: ToyCorpusSpec, seed: int, out_dir: str | Path) -> list[Path]:
    """Write ``{split}.src``/``{split}.tgt`` for each split and ``embeddings.txt``."""
    out_path = Path(out_dir)
    out_path.mkdir(parents=True, exist_ok=True)
    train, valid, test, embeddings = generate_toy_corpus(spec, seed)
    written = []
    for corpus in (train, valid, test):
        source_path, target_path = out_path / f'{corpus.name}.src', out_path / f'{corpus.name}.tgt'
        write_parallel(corpus, source_path, target_path)
        written += [source_path, target_path]
    embeddings_path = out_path / 'embeddings.txt'
    embeddings_path.write_text(embeddings, encoding='utf-8')
    written.append(embeddings_path)
    return written
