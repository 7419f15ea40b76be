"""
Copyright ©2025. The Regents of the University of California (Regents). All Rights Reserved.

See LICENSE at the repository root for terms of use, copying and distribution.
"""

"""Attentional encoder-decoder.

Two-layer bidirectional LSTM encoder, two-layer LSTM decoder with dot attention
and input feeding, softmax output layer. Every function works on a batch: ids
are [B x J] integer arrays and masks hold 1.0 on real tokens, 0.0 on padding.
"""

from collections.abc import Sequence
from dataclasses import dataclass, replace

import numpy as np

from embnmt.app.autodiff import ops
from embnmt.app.autodiff.tape import Tensor
from embnmt.app.core.errors import ContractViolation
from embnmt.app.models.params import NUM_LAYERS, ModelParams
from embnmt.app.services.corpus import Batch


class Dropout:
    """Draws inverted-dropout masks from its own generator; p=0 is the identity."""

    def __init__(self, p: float, rng: np.random.Generator | None = None):
        if not 0.0 <= p < 1.0:
            raise ContractViolation(f'dropout probability must lie in [0, 1), got {p}')
        self.p = p
        self.rng = rng if rng is not None else np.random.default_rng(0)

    def __call__(self, x: Tensor) -> Tensor:
        if self.p == 0.0:
            return x
        keep = self.rng.random(x.shape) >= self.p
        return ops.dropout(x, keep, self.p)


NO_DROPOUT = Dropout(0.0)


@dataclass(frozen=True)
class EncoderOutput:
    source_vectors: Tensor  # [B x J x 2H], h_j = [forward h_j ; backward h_j]
    keys: Tensor  # [B x J x H], projected source vectors scored against d_i
    mask: np.ndarray  # [B x J]
    final_state: Tensor  # [B x H], projected h_J, initial hidden state of decoder layer 0

    @property
    def batch_size(self) -> int:
        return self.mask.shape[0]

    def select(self, rows: np.ndarray) -> 'EncoderOutput':
        rows = np.asarray(rows, dtype=np.int64)
        return EncoderOutput(
            source_vectors=ops.slice(self.source_vectors, (rows,)),
            keys=ops.slice(self.keys, (rows,)),
            mask=self.mask[rows],
            final_state=ops.slice(self.final_state, (rows,)),
        )


@dataclass(frozen=True)
class DecoderState:
    hidden: tuple[Tensor, ...]
    cells: tuple[Tensor, ...]
    feed: Tensor  # previous d-tilde, zeros at step 0
    step: int = 0
    attention: Tensor | None = None

    def select(self, rows: np.ndarray) -> 'DecoderState':
        """Reorder batch rows, e.g. to follow surviving beam hypotheses."""
        rows = np.asarray(rows, dtype=np.int64)
        return DecoderState(
            hidden=tuple(ops.slice(h, (rows,)) for h in self.hidden),
            cells=tuple(ops.slice(c, (rows,)) for c in self.cells),
            feed=ops.slice(self.feed, (rows,)),
            step=self.step,
            attention=None if self.attention is None else ops.slice(self.attention, (rows,)),
        )


def _zeros(rows: int, width: int) -> Tensor:
    return Tensor(np.zeros((rows, width)))


def _lstm_cell(params: ModelParams, prefix: str, x: Tensor, h: Tensor, c: Tensor) -> tuple[Tensor, Tensor]:
    width = h.shape[-1]
    z = ops.add(ops.matmul(ops.concat([x, h], axis=-1), params[f'{prefix}_W']), params[f'{prefix}_b'])

    def gate(k: int) -> Tensor:
        return ops.slice(z, (slice(None), slice(k * width, (k + 1) * width)))

    i, f, o, g = ops.sigmoid(gate(0)), ops.sigmoid(gate(1)), ops.sigmoid(gate(2)), ops.tanh(gate(3))
    c_new = ops.add(ops.mul(f, c), ops.mul(i, g))
    return ops.mul(o, ops.tanh(c_new)), c_new


def _carry(new: Tensor, old: Tensor, keep: np.ndarray) -> Tensor:
    # Padded positions pass the previous state through unchanged
    return ops.add(ops.mul(new, keep), ops.mul(old, 1.0 - keep))


def _run_stack(params: ModelParams, prefix: str, steps: Sequence[Tensor], mask: np.ndarray, order: Sequence[int], dropout: Dropout) -> list[Tensor]:
    hidden_dim = params.hidden_dim
    rows = mask.shape[0]
    inputs = list(steps)
    for layer in range(NUM_LAYERS):
        if layer > 0:
            inputs = [dropout(x) for x in inputs]
        h, c = _zeros(rows, hidden_dim), _zeros(rows, hidden_dim)
        outputs: list[Tensor | None] = [None] * len(inputs)
        for j in order:
            keep = mask[:, j : j + 1]
            h_new, c_new = _lstm_cell(params, f'{prefix}_{layer}', inputs[j], h, c)
            h, c = _carry(h_new, h, keep), _carry(c_new, c, keep)
            outputs[j] = h
        inputs = outputs
    return inputs


def encode(params: ModelParams, source_ids: np.ndarray, source_mask: np.ndarray, dropout: Dropout = NO_DROPOUT) -> EncoderOutput:
    """Run both directions over the source and build keys and the decoder's initial state."""
    ids = np.asarray(source_ids, dtype=np.int64)
    mask = np.asarray(source_mask, dtype=np.float64)
    if ids.ndim != 2 or ids.shape != mask.shape:
        raise ContractViolation(f'encode: ids {ids.shape} and mask {mask.shape} must be matching 2-D arrays')
    lengths = mask.sum(axis=1).astype(np.int64)
    if np.any(lengths == 0):
        raise ContractViolation('encode: a source row consists of padding only')
    rows, width = ids.shape
    hidden_dim = params.hidden_dim

    embedded = dropout(ops.embedding(params['src_embed'], ids))
    steps = [ops.slice(embedded, (slice(None), j)) for j in range(width)]
    forward = _run_stack(params, 'enc_fwd', steps, mask, range(width), dropout)
    backward = _run_stack(params, 'enc_bwd', steps, mask, range(width - 1, -1, -1), dropout)

    columns = [ops.reshape(ops.concat([f, b], axis=-1), (rows, 1, 2 * hidden_dim)) for f, b in zip(forward, backward, strict=True)]
    source_vectors = ops.concat(columns, axis=1)
    last = ops.slice(source_vectors, (np.arange(rows), lengths - 1))
    return EncoderOutput(
        source_vectors=source_vectors,
        keys=ops.matmul(source_vectors, params['W_p']),
        mask=mask,
        final_state=ops.matmul(last, params['W_p']),
    )


def initial_state(params: ModelParams, encoder_out: EncoderOutput) -> DecoderState:
    rows, hidden_dim = encoder_out.batch_size, params.hidden_dim
    return DecoderState(
        hidden=(encoder_out.final_state, *(_zeros(rows, hidden_dim) for _ in range(NUM_LAYERS - 1))),
        cells=tuple(_zeros(rows, hidden_dim) for _ in range(NUM_LAYERS)),
        feed=_zeros(rows, hidden_dim),
    )


def attention_weights(d: Tensor, keys: Tensor, mask: np.ndarray) -> Tensor:
    """Softmax over dot scores d_i . key_j; padded positions get weight exactly 0."""
    rows, width, hidden_dim = keys.shape
    scores = ops.matmul(keys, ops.reshape(d, (rows, hidden_dim, 1)))
    return ops.softmax(ops.reshape(scores, (rows, width)), axis=-1, mask=mask)


def context(alpha: Tensor, source_vectors: Tensor) -> Tensor:
    rows, width, vector_dim = source_vectors.shape
    weighted = ops.matmul(ops.reshape(alpha, (rows, 1, width)), source_vectors)
    return ops.reshape(weighted, (rows, vector_dim))


def decoder_step(
    params: ModelParams,
    state: DecoderState,
    prev_ids: np.ndarray,
    encoder_out: EncoderOutput,
    dropout: Dropout = NO_DROPOUT,
) -> tuple[DecoderState, Tensor]:
    """One target position: LSTM on [emb(y_{i-1}); feed], attention, d~ = tanh(W_c [c; d])."""
    x = dropout(ops.embedding(params['tgt_embed'], np.asarray(prev_ids, dtype=np.int64)))
    layer_input = ops.concat([x, state.feed], axis=-1)
    hidden, cells = [], []
    for layer in range(NUM_LAYERS):
        if layer > 0:
            layer_input = dropout(layer_input)
        h, c = _lstm_cell(params, f'dec_{layer}', layer_input, state.hidden[layer], state.cells[layer])
        hidden.append(h)
        cells.append(c)
        layer_input = h

    d = hidden[-1]
    alpha = attention_weights(d, encoder_out.keys, encoder_out.mask)
    c_i = context(alpha, encoder_out.source_vectors)
    d_tilde = ops.tanh(ops.matmul(ops.concat([c_i, d], axis=-1), params['W_c']))
    new_state = replace(state, hidden=tuple(hidden), cells=tuple(cells), feed=d_tilde, step=state.step + 1, attention=alpha)
    return new_state, d_tilde


def output_distribution(params: ModelParams, d_tilde: Tensor, dropout: Dropout = NO_DROPOUT) -> Tensor:
    """softmax(W_s d~) over the target vocabulary."""
    logits = ops.matmul(dropout(d_tilde), ops.transpose(params['W_s']))
    return ops.softmax(logits, axis=-1)


def forward_probs(params: ModelParams, batch: Batch, dropout: Dropout = NO_DROPOUT) -> Tensor:
    """Teacher-forced output distributions, shape [B x steps x V]."""
    encoder_out = encode(params, batch.source_ids, batch.source_mask, dropout)
    state = initial_state(params, encoder_out)
    inputs = batch.decoder_inputs
    rows, vocab_size = batch.size, params.tgt_vocab_size
    columns = []
    for i in range(inputs.shape[1]):
        state, d_tilde = decoder_step(params, state, inputs[:, i], encoder_out, dropout)
        probs = output_distribution(params, d_tilde, dropout)
        columns.append(ops.reshape(probs, (rows, 1, vocab_size)))
    return ops.concat(columns, axis=1)
