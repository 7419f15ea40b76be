"""
Copyright ©2025. The Regents of the University of California (Regents). All Rights Reserved.

See LICENSE at the repository root for terms of use, copying and distribution.
"""

import math
from collections import Counter
from collections.abc import Sequence

from embnmt.app.core.errors import CorpusStructureError
from embnmt.app.core.logger import logger
from embnmt.app.schemas.evaluation import EvalReport, MetricDelta, NearMissResult
from embnmt.app.services.embeddings import EmbeddingStore, nearest_neighbors
from embnmt.app.services.vocab import SPECIAL_TOKENS, UNK_TOKEN

Corpus = Sequence[Sequence[str]]


def _check_aligned(hypotheses: Corpus, references: Corpus) -> None:
    if len(hypotheses) != len(references):
        raise CorpusStructureError(f'{len(hypotheses)} hypotheses vs {len(references)} references')


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def clipped_precision(hypotheses: Corpus, references: Corpus, n: int) -> tuple[int, int]:
    """Corpus totals of (clipped n-gram matches, hypothesis n-grams)."""
    _check_aligned(hypotheses, references)
    matches = total = 0
    for hyp, ref in zip(hypotheses, references, strict=True):
        hyp_counts, ref_counts = _ngrams(hyp, n), _ngrams(ref, n)
        matches += sum(min(count, ref_counts[gram]) for gram, count in hyp_counts.items())
        total += max(len(hyp) - n + 1, 0)
    return matches, total


def corpus_bleu(hypotheses: Corpus, references: Corpus, max_n: int = 4, smooth: bool = False) -> float:
    """Corpus BLEU in percent; 0 when any n-gram precision is 0 unless ``smooth`` adds one for n >= 2."""
    _check_aligned(hypotheses, references)
    log_precisions = []
    for n in range(1, max_n + 1):
        matches, total = clipped_precision(hypotheses, references, n)
        if smooth and n >= 2:
            matches, total = matches + 1, total + 1
        if matches == 0 or total == 0:
            return 0.0
        log_precisions.append(math.log(matches / total))

    hyp_len = sum(len(h) for h in hypotheses)
    ref_len = sum(len(r) for r in references)
    brevity = 1.0 if hyp_len >= ref_len else math.exp(1.0 - ref_len / hyp_len)
    return 100.0 * brevity * math.exp(sum(log_precisions) / max_n)


def unk_rate(hypotheses: Corpus) -> float:
    tokens = sum(len(h) for h in hypotheses)
    if tokens == 0:
        return 0.0
    return sum(h.count(UNK_TOKEN) for h in hypotheses) / tokens


def near_miss_accuracy(
    hypotheses: Corpus,
    references: Corpus,
    store: EmbeddingStore,
    k: int = 5,
    use_oov_vectors: bool = False,
) -> NearMissResult:
    """Share of positionally aligned mismatches whose hypothesis word is a k-nearest neighbor of the reference.

    Reference OOV words are looked up through the UNK row, or through their own
    vector when ``use_oov_vectors`` is set and the store retained one. A
    hypothesis special token (``<unk>``) never counts as a neighbor.
    """
    _check_aligned(hypotheses, references)
    vocab = store.vocab
    neighbors: dict[int, frozenset[int]] = {}
    mismatches = hits = 0
    for hyp, ref in zip(hypotheses, references, strict=True):
        for hyp_word, ref_word in zip(hyp, ref, strict=False):
            if hyp_word == ref_word or ref_word in SPECIAL_TOKENS:
                continue
            mismatches += 1
            ref_id = store.reference_id(ref_word) if use_oov_vectors else vocab.id_of(ref_word)
            if ref_id not in neighbors:
                neighbors[ref_id] = frozenset(nearest_neighbors(store, ref_id, k))
            if hyp_word in vocab and vocab.id_of(hyp_word) in neighbors[ref_id]:
                hits += 1
    if mismatches == 0:
        return NearMissResult(accuracy=1.0, mismatches=0, hits=0, zero_mismatch=True)
    return NearMissResult(accuracy=hits / mismatches, mismatches=mismatches, hits=hits)


def evaluate(
    hypotheses: Corpus,
    references: Corpus,
    store: EmbeddingStore | None = None,
    k: int = 5,
    smooth: bool = False,
    use_oov_vectors: bool = False,
) -> EvalReport:
    _check_aligned(hypotheses, references)
    report = EvalReport(
        bleu=corpus_bleu(hypotheses, references, smooth=smooth),
        unk_rate=unk_rate(hypotheses),
        sentence_count=len(hypotheses),
    )
    if store is not None:
        near_miss = near_miss_accuracy(hypotheses, references, store, k, use_oov_vectors)
        report = report.model_copy(
            update={
                'near_miss_accuracy': near_miss.accuracy,
                'near_miss_positions': near_miss.mismatches,
                'zero_mismatch': near_miss.zero_mismatch,
            }
        )
    logger.info(f'Evaluated {len(hypotheses)} sentences: {report.to_record()}')
    return report


def compare_reports(baseline: EvalReport, proposed: EvalReport) -> MetricDelta:
    """Metric gains of ``proposed`` over ``baseline`` (positive = higher)."""
    near_miss = None
    if baseline.near_miss_accuracy is not None and proposed.near_miss_accuracy is not None:
        near_miss = proposed.near_miss_accuracy - baseline.near_miss_accuracy
    return MetricDelta(
        bleu=proposed.bleu - baseline.bleu,
        unk_rate=proposed.unk_rate - baseline.unk_rate,
        near_miss_accuracy=near_miss,
    )
