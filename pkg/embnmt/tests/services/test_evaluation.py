"""
Copyright ©2025. The Regents of the University of California (Regents). All Rights Reserved.

See LICENSE at the repository root for terms of use, copying and distribution.
"""

import math

import numpy as np
import pytest

from embnmt.app.core.errors import CorpusStructureError
from embnmt.app.schemas.evaluation import EvalReport
from embnmt.app.services.embeddings import EmbeddingStore
from embnmt.app.services.evaluation import clipped_precision, compare_reports, corpus_bleu, evaluate, near_miss_accuracy, unk_rate
from embnmt.app.services.vocab import Vocabulary


def _naive_bleu(hypotheses, references, max_n=4) -> float:
    # Independent counter: explicit n-gram lists and list.count clipping
    log_sum = 0.0
    for n in range(1, max_n + 1):
        matches = total = 0
        for hyp, ref in zip(hypotheses, references, strict=True):
            hyp_grams = [tuple(hyp[i : i + n]) for i in range(len(hyp) - n + 1)]
            ref_grams = [tuple(ref[i : i + n]) for i in range(len(ref) - n + 1)]
            for gram in set(hyp_grams):
                matches += min(hyp_grams.count(gram), ref_grams.count(gram))
            total += len(hyp_grams)
        if matches == 0:
            return 0.0
        log_sum += math.log(matches / total)
    c = sum(len(h) for h in hypotheses)
    r = sum(len(x) for x in references)
    penalty = 1.0 if c >= r else math.exp(1 - r / c)
    return 100 * penalty * math.exp(log_sum / max_n)


@pytest.fixture()
def cluster_store() -> EmbeddingStore:
    """Two tight clusters on a line: {x1, x2, x3} near 0 and {y1, y2, y3} near 10."""
    vocab = Vocabulary(['x1', 'x2', 'x3', 'y1', 'y2', 'y3'])
    matrix = np.array([[50.0], [5.0], [60.0], [70.0], [0.0], [0.1], [0.2], [10.0], [10.1], [10.2]])
    return EmbeddingStore(vocab, matrix, coverage=1.0)


# BLEU


def test_identical_corpus_scores_100():
    corpus = [['the', 'cat', 'sat', 'on', 'the', 'mat'], ['a', 'b', 'c', 'd']]
    assert corpus_bleu(corpus, corpus) == pytest.approx(100.0)


def test_clipped_unigram_precision_hand_case():
    hyp = [['the'] * 7]
    ref = [['the', 'cat', 'is', 'on', 'the', 'mat']]
    assert clipped_precision(hyp, ref, 1) == (2, 7)


def test_bleu_matches_naive_counter():
    """Test against the naive counter on noisy copies of the references, so every n-gram order matches."""
    rng = np.random.default_rng(0)
    words = ['a', 'b', 'c', 'd', 'e']
    trials = 30
    checked = 0
    for _ in range(trials):
        refs = [list(rng.choice(words, size=int(rng.integers(6, 12)))) for _ in range(6)]
        hyps = []
        for ref in refs:
            hyp = [str(rng.choice(words)) if rng.random() < 0.2 else word for word in ref]
            # Some hypotheses run short, so the brevity penalty is exercised too
            hyps.append(hyp[: len(hyp) - int(rng.integers(0, 3))])
        expected = _naive_bleu(hyps, refs)
        assert corpus_bleu(hyps, refs) == pytest.approx(expected, abs=1e-6)
        checked += expected > 0
    assert checked == trials


def test_bleu_is_order_invariant():
    hyps = [['a', 'b', 'c', 'd'], ['b', 'c', 'd', 'e', 'f']]
    refs = [['a', 'b', 'c', 'd', 'x'], ['b', 'c', 'd', 'e', 'f']]
    assert corpus_bleu(hyps, refs) == pytest.approx(corpus_bleu(hyps[::-1], refs[::-1]))


def test_bleu_zero_without_four_gram_unless_smoothed():
    hyps = [['a', 'b', 'c']]
    refs = [['a', 'b', 'c']]
    assert corpus_bleu(hyps, refs) == 0.0
    assert corpus_bleu(hyps, refs, smooth=True) > 0.0


def test_bleu_rejects_unaligned_corpora():
    with pytest.raises(CorpusStructureError):
        corpus_bleu([['a']], [['a'], ['b']])


# UNK rate


@pytest.mark.parametrize(
    'hypotheses, rate',
    [
        ([['a', 'b']], 0.0),
        ([['<unk>', '<unk>']], 1.0),
        ([['<unk>', 'a', 'b', 'c', 'd'], ['e', 'f', '<unk>', 'g', 'h']], 0.2),
        ([], 0.0),
    ],
)
def test_unk_rate(hypotheses, rate):
    assert unk_rate(hypotheses) == pytest.approx(rate)


# Near-miss accuracy


def test_near_miss_identical_is_vacuous(cluster_store):
    result = near_miss_accuracy([['x1', 'y1']], [['x1', 'y1']], cluster_store, k=2)
    assert result.accuracy == 1.0
    assert result.zero_mismatch


def test_near_miss_cluster_mates(cluster_store):
    result = near_miss_accuracy([['x2', 'y3', 'x1']], [['x1', 'y1', 'x3']], cluster_store, k=2)
    assert (result.hits, result.mismatches) == (3, 3)
    assert result.accuracy == 1.0


def test_near_miss_cross_cluster(cluster_store):
    result = near_miss_accuracy([['y1', 'x2']], [['x1', 'y2']], cluster_store, k=2)
    assert result.accuracy == 0.0


def test_near_miss_counts_unk_as_miss_and_skips_reference_specials(cluster_store):
    """Test that a hypothesis <unk> misses while a reference special is not a position."""
    result = near_miss_accuracy([['<unk>', 'x2', 'y1']], [['x1', '</s>', 'y2']], cluster_store, k=2)
    assert (result.hits, result.mismatches) == (1, 2)


def test_near_miss_aligns_up_to_shorter_sentence(cluster_store):
    result = near_miss_accuracy([['x2']], [['x1', 'y1', 'y2']], cluster_store, k=2)
    assert result.mismatches == 1


def test_near_miss_oov_reference_vectors():
    """Test that an OOV reference uses its own retained vector when asked to."""
    vocab = Vocabulary(['x1', 'y1'])
    matrix = np.array([[50.0], [5.0], [60.0], [70.0], [0.0], [10.0]])
    store = EmbeddingStore(vocab, matrix, coverage=1.0, extra_words={'x9': np.array([0.3])})
    # Through the UNK row (at 5.0) both words are equally far; the retained vector sits at x1
    assert near_miss_accuracy([['x1']], [['x9']], store, k=1, use_oov_vectors=True).accuracy == 1.0
    assert near_miss_accuracy([['y1']], [['x9']], store, k=1, use_oov_vectors=True).accuracy == 0.0


# Reports


def test_evaluate_report(cluster_store):
    hyps = [['x1', 'x2', 'y1', 'y2'], ['<unk>', 'y3', 'x3', 'x1']]
    refs = [['x1', 'x2', 'y1', 'y2'], ['x2', 'y3', 'x3', 'x1']]
    report = evaluate(hyps, refs, store=cluster_store, k=2)
    assert report.sentence_count == 2
    assert report.unk_rate == pytest.approx(1 / 8)
    assert report.near_miss_positions == 1
    assert report.near_miss_accuracy == 0.0
    assert evaluate(hyps, refs).near_miss_accuracy is None


def test_report_forms_follow_key_order():
    report = EvalReport(bleu=12.5, unk_rate=0.25, near_miss_accuracy=0.5, near_miss_positions=4, zero_mismatch=False, sentence_count=3)
    keys = [line.split(' = ')[0] for line in report.to_text().splitlines()]
    assert keys == list(EvalReport.KEY_ORDER)
    assert report.to_record().split('\t')[0] == 'bleu=12.5000'
    assert 'near_miss_accuracy' not in EvalReport(bleu=1.0, unk_rate=0.0).to_text()


def test_compare_reports():
    baseline = EvalReport(bleu=10.0, unk_rate=0.3, near_miss_accuracy=0.4)
    proposed = EvalReport(bleu=12.0, unk_rate=0.1, near_miss_accuracy=0.6)
    delta = compare_reports(baseline, proposed)
    assert delta.bleu == pytest.approx(2.0)
    assert delta.unk_rate == pytest.approx(-0.2)
    assert delta.near_miss_accuracy == pytest.approx(0.2)
    assert compare_reports(EvalReport(bleu=1.0, unk_rate=0.0), proposed).near_miss_accuracy is None
