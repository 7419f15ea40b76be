"""
Copyright ©2025. The Regents of the University of California (Regents). All Rights Reserved.

See LICENSE at the repository root for terms of use, copying and distribution.
"""

"""Cross-entropy, embedding-distance loss and their per-phase combination.

All losses take probabilities shaped [steps x V] (one sentence) or [B x steps x V],
sum over the unpadded positions of each sentence, then average over sentences.
"""

import numpy as np

from embnmt.app.autodiff import ops
from embnmt.app.autodiff.tape import Tensor, checked_mode
from embnmt.app.core.errors import ConfigurationError, ContractViolation
from embnmt.app.core.logger import logger
from embnmt.app.schemas.training import LossBreakdown, Phase, TrainingStrategy
from embnmt.app.services.embeddings import EmbeddingStore, distance_matrix

PROBABILITY_FLOOR = 1e-12


def _batched(probs: Tensor, target_ids, target_mask) -> tuple[Tensor, np.ndarray, np.ndarray]:
    ids = np.asarray(target_ids, dtype=np.int64)
    mask = np.asarray(target_mask, dtype=np.float64)
    if probs.ndim == 2:
        probs = ops.reshape(probs, (1, *probs.shape))
        ids, mask = ids.reshape(1, -1), mask.reshape(1, -1)
    if probs.ndim != 3 or probs.shape[:2] != ids.shape or ids.shape != mask.shape:
        raise ContractViolation(f'loss: probs {probs.shape} do not line up with ids {ids.shape} and mask {mask.shape}')
    return probs, ids, mask


def cross_entropy_loss(probs: Tensor, target_ids, target_mask) -> Tensor:
    """-sum log p(reference) over unpadded positions, averaged over sentences."""
    probs, ids, mask = _batched(probs, target_ids, target_mask)
    rows, steps, vocab_size = probs.shape
    if ids.size and (ids.min() < 0 or ids.max() >= vocab_size):
        raise ContractViolation(f'reference ids outside [0, {vocab_size})')
    row_index, step_index = np.meshgrid(np.arange(rows), np.arange(steps), indexing='ij')
    picked = ops.slice(probs, (row_index, step_index, ids))
    if checked_mode():
        clamped = int(np.sum((picked.data < PROBABILITY_FLOOR) & (mask > 0)))
        if clamped:
            logger.warning(f'{clamped} reference probabilities clamped at {PROBABILITY_FLOOR} before log')
    log_probs = ops.log(picked, floor=PROBABILITY_FLOOR)
    return ops.scale(ops.sum(ops.mul(log_probs, mask)), -1.0 / rows)


def _distance_weights(probs: Tensor, ref_ids: np.ndarray, mask: np.ndarray, store: EmbeddingStore) -> np.ndarray:
    if probs.shape[-1] != store.vocab_size:
        raise ContractViolation(f'probability width {probs.shape[-1]} != embedding vocabulary {store.vocab_size}')
    return distance_matrix(store, ref_ids) * mask[..., None]


def embedding_loss(probs: Tensor, target_ids, target_mask, store: EmbeddingStore) -> Tensor:
    """sum_i sum_k p(V_k) d(E(V_k), E(y_i)) over unpadded positions, averaged over sentences.

    Distances are constants, so gradients flow through ``probs`` only. ``target_ids``
    may hold extended reference ids for OOV words with their own vector.
    """
    probs, ids, mask = _batched(probs, target_ids, target_mask)
    weights = _distance_weights(probs, ids, mask, store)
    return ops.scale(ops.sum(ops.mul(probs, weights)), 1.0 / probs.shape[0])


def combined_loss(
    probs: Tensor,
    target_ids,
    target_mask,
    store: EmbeddingStore | None,
    strategy: TrainingStrategy,
    ref_ids=None,
) -> LossBreakdown:
    """Loss of the strategy's active phase plus both components for reporting.

    ``ref_ids`` (default ``target_ids``) selects the distance rows of the embedding term.
    The component that is not part of the objective is computed off the tape. Without
    a store the embedding component reads 0 and only the ENT phase is allowed.
    """
    phase = strategy.active_phase
    if phase is not Phase.ENT and store is None:
        raise ConfigurationError(f'phase {phase.value} needs an embedding store')
    ref_ids = target_ids if ref_ids is None else ref_ids
    batched, ids, mask = _batched(probs, target_ids, target_mask)
    refs = np.asarray(ref_ids, dtype=np.int64).reshape(ids.shape)

    ent = cross_entropy_loss(batched, ids, mask) if phase is not Phase.EMB else None
    emb = embedding_loss(batched, refs, mask, store) if phase is not Phase.ENT else None

    if ent is None:
        ent_value = _cross_entropy_value(batched.data, ids, mask)
    else:
        ent_value = ent.item()
    if emb is None:
        emb_value = 0.0 if store is None else float(np.sum(batched.data * _distance_weights(batched, refs, mask, store))) / batched.shape[0]
    else:
        emb_value = emb.item()

    if phase is Phase.ENT:
        objective = ent
    elif phase is Phase.EMB:
        objective = emb
    else:
        objective = ops.add(ent, ops.scale(emb, strategy.emb_weight))
    return LossBreakdown(
        total=objective.item(),
        ent_component=ent_value,
        emb_component=emb_value,
        token_count=int(mask.sum()),
        objective=objective,
    )


def _cross_entropy_value(probs: np.ndarray, ids: np.ndarray, mask: np.ndarray) -> float:
    picked = np.take_along_axis(probs, ids[..., None], axis=-1)[..., 0]
    return float(-np.sum(np.log(np.maximum(picked, PROBABILITY_FLOOR)) * mask)) / probs.shape[0]
