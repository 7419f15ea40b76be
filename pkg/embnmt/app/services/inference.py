"""
Copyright ©2025. The Regents of the University of California (Regents). All Rights Reserved.

See LICENSE at the repository root for terms of use, copying and distribution.
"""

from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from embnmt.app.core.config_manager import settings
from embnmt.app.core.errors import ContractViolation
from embnmt.app.core.logger import logger
from embnmt.app.models.params import ModelParams
from embnmt.app.models.seq2seq import DecoderState, EncoderOutput, decoder_step, encode, initial_state, output_distribution
from embnmt.app.services.vocab import BOS, EOS, PAD, Vocabulary, decode_ids, encode as encode_tokens
from embnmt.app.utils.simple_tracer import trace_step


@dataclass(frozen=True)
class Hypothesis:
    tokens: tuple[int, ...]  # BOS first
    log_prob: float
    finished: bool = False

    @property
    def length(self) -> int:
        return len(self.tokens) - 1

    @property
    def output_ids(self) -> list[int]:
        """Generated ids without BOS and the closing EOS."""
        body = list(self.tokens[1:])
        return body[:-1] if body and body[-1] == EOS else body

    def score(self, alpha: float = 0.0) -> float:
        return self.log_prob / max(self.length, 1) ** alpha if alpha else self.log_prob


def default_max_len(source_length: int) -> int:
    return 2 * source_length + 10


def _encode_one(params: ModelParams, source_ids: Sequence[int]) -> EncoderOutput:
    ids = np.asarray([list(source_ids)], dtype=np.int64)
    if ids.shape[1] == 0:
        raise ContractViolation('cannot decode an empty source sentence')
    return encode(params, ids, np.ones(ids.shape))


def _next_log_probs(params: ModelParams, state: DecoderState, prev_ids: np.ndarray, encoder_out: EncoderOutput) -> tuple[DecoderState, np.ndarray]:
    state, d_tilde = decoder_step(params, state, prev_ids, encoder_out)
    probs = output_distribution(params, d_tilde).data.astype(np.float64)
    with np.errstate(divide='ignore'):
        log_probs = np.log(probs)
    # PAD and BOS are never proposed
    log_probs[:, PAD] = -np.inf
    log_probs[:, BOS] = -np.inf
    return state, log_probs


def greedy_decode(params: ModelParams, source_ids: Sequence[int], max_len: int | None = None) -> Hypothesis:
    """Feed back the argmax word (smaller id on ties) until EOS or max_len."""
    max_len = default_max_len(len(source_ids)) if max_len is None else max_len
    if max_len < 1:
        raise ContractViolation(f'max_len must be at least 1, got {max_len}')
    encoder_out = _encode_one(params, source_ids)
    state = initial_state(params, encoder_out)
    tokens, total = [BOS], 0.0
    for _ in range(max_len):
        state, log_probs = _next_log_probs(params, state, np.asarray([tokens[-1]]), encoder_out)
        word = int(np.argmax(log_probs[0]))
        tokens.append(word)
        total += float(log_probs[0, word])
        if word == EOS:
            break
    return Hypothesis(tuple(tokens), total, finished=True)


def top_candidates(totals: np.ndarray, k: int) -> list[tuple[int, int]]:
    """(row, word) of the k best finite entries, best first; ties go to the smaller flat index."""
    scores = totals.ravel()
    finite = np.isfinite(scores)
    take = min(k, int(finite.sum()))
    if take == 0:
        return []
    scores = np.where(finite, scores, -np.inf)
    kth = np.partition(scores, scores.size - take)[scores.size - take]
    chosen = np.flatnonzero(scores > kth)
    chosen = np.concatenate([chosen, np.flatnonzero(scores == kth)[: take - chosen.size]])
    chosen = chosen[np.lexsort((chosen, -scores[chosen]))]
    width = totals.shape[1]
    return [(int(index) // width, int(index) % width) for index in chosen]


def beam_search(
    params: ModelParams, source_ids: Sequence[int], beam_width: int, max_len: int | None = None, length_norm_alpha: float = 0.0
) -> Hypothesis:
    """Keep the beam_width best extensions per step; EOS extensions leave the beam as finished.

    Search stops once beam_width hypotheses have finished or max_len is reached;
    the result maximizes log_prob / length ** alpha among finished hypotheses.
    """
    if beam_width < 1:
        raise ContractViolation(f'beam_width must be at least 1, got {beam_width}')
    max_len = default_max_len(len(source_ids)) if max_len is None else max_len
    if max_len < 1:
        raise ContractViolation(f'max_len must be at least 1, got {max_len}')
    encoder_out = _encode_one(params, source_ids)
    alive = [Hypothesis((BOS,), 0.0)]
    state = initial_state(params, encoder_out)
    finished: list[Hypothesis] = []

    for _ in range(max_len):
        rows = np.zeros(len(alive), dtype=np.int64)
        prev = np.asarray([h.tokens[-1] for h in alive])
        state, log_probs = _next_log_probs(params, state, prev, encoder_out.select(rows))
        totals = np.asarray([h.log_prob for h in alive])[:, None] + log_probs

        next_alive, parents = [], []
        for r, w in top_candidates(totals, beam_width):
            hyp = Hypothesis((*alive[r].tokens, w), float(totals[r, w]))
            if w == EOS:
                finished.append(Hypothesis(hyp.tokens, hyp.log_prob, finished=True))
            else:
                next_alive.append(hyp)
                parents.append(r)
        if len(finished) >= beam_width or not next_alive:
            alive = []
            break
        alive = next_alive
        state = state.select(np.asarray(parents))

    finished += [Hypothesis(h.tokens, h.log_prob, finished=True) for h in alive]
    return max(finished, key=lambda h: h.score(length_norm_alpha))


def translate_sentence(
    params: ModelParams,
    vocab_src: Vocabulary,
    vocab_tgt: Vocabulary,
    tokens: Sequence[str],
    beam_width: int = 1,
    alpha: float = 0.0,
    max_len: int | None = None,
) -> list[str]:
    if not tokens:
        return []
    source_ids = encode_tokens(vocab_src, tokens)
    if beam_width == 1 and alpha == 0.0:
        best = greedy_decode(params, source_ids, max_len)
    else:
        best = beam_search(params, source_ids, beam_width, max_len, alpha)
    return decode_ids(vocab_tgt, best.output_ids)


@trace_step
def translate_corpus(
    params: ModelParams,
    vocab_src: Vocabulary,
    vocab_tgt: Vocabulary,
    sentences: Sequence[Sequence[str]],
    beam_width: int = 1,
    alpha: float = 0.0,
    max_len: int | None = None,
    threads: int | None = None,
) -> list[list[str]]:
    """Decode every sentence, output order matching input order."""
    cap = settings.EMB_NMT_THREADS
    workers = max(1, min(threads or cap, cap))
    logger.info(f'Translating {len(sentences)} sentences with {workers} worker(s), beam {beam_width}')

    def run(tokens: Sequence[str]) -> list[str]:
        return translate_sentence(params, vocab_src, vocab_tgt, tokens, beam_width, alpha, max_len)

    if workers == 1:
        return [run(tokens) for tokens in sentences]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, sentences))
