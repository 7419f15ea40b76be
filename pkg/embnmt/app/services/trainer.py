"""
Copyright ©2025. The Regents of the University of California (Regents). All Rights Reserved.

See LICENSE at the repository root for terms of use, copying and distribution.
"""

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from embnmt.app.autodiff.tape import Tape, backward, set_default_dtype
from embnmt.app.core.errors import ConfigurationError, ContractViolation, NonFiniteError
from embnmt.app.core.logger import logger
from embnmt.app.models.params import ModelParams, init_params
from embnmt.app.models.seq2seq import NO_DROPOUT, Dropout, forward_probs
from embnmt.app.schemas.checkpoint import CheckpointState
from embnmt.app.schemas.training import (
    CheckpointMeta,
    EpochRecord,
    LossBreakdown,
    Phase,
    PretrainTermination,
    TrainConfig,
    TrainingStrategy,
)
from embnmt.app.services.checkpoint import save_checkpoint
from embnmt.app.services.corpus import Batch
from embnmt.app.services.embeddings import EmbeddingStore
from embnmt.app.services.loss import combined_loss
from embnmt.app.services.vocab import Vocabulary
from embnmt.app.utils.simple_tracer import trace_step

BEST_CHECKPOINT = 'best.ckpt'
PRETRAIN_CHECKPOINT = 'pretrain.ckpt'
TRAINING_LOG = 'training_log.tsv'


@dataclass
class AdamState:
    """First/second moment estimates per parameter name and the global step counter."""

    first: dict[str, np.ndarray] = field(default_factory=dict)
    second: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0


@dataclass
class TrainingData:
    train: list[Batch]
    valid: list[Batch]
    vocab_src: Vocabulary
    vocab_tgt: Vocabulary


@dataclass
class RunResult:
    best: CheckpointMeta
    records: list[EpochRecord]
    log_path: Path
    pretrain: CheckpointMeta | None = None


def global_norm(grads: Mapping[str, np.ndarray]) -> float:
    return math.sqrt(sum(float(np.sum(np.square(g, dtype=np.float64))) for g in grads.values()))


def clip_gradients(grads: Mapping[str, np.ndarray], max_norm: float = 5.0) -> dict[str, np.ndarray]:
    """Rescale all gradients by max_norm / norm when the global L2 norm exceeds max_norm."""
    norm = global_norm(grads)
    if norm <= max_norm:
        return dict(grads)
    factor = max_norm / norm
    return {name: g * factor for name, g in grads.items()}


def adam_step(params: ModelParams, grads: Mapping[str, np.ndarray], config: TrainConfig, state: AdamState, lr: float) -> ModelParams:
    """Bias-corrected Adam update followed by decoupled weight decay, in place."""
    missing = set(params.names()) - set(grads)
    if missing:
        raise ContractViolation(f'adam_step: no gradient for {sorted(missing)}')
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f'non-finite gradient for {name}')

    state.step += 1
    beta1, beta2 = config.adam_beta1, config.adam_beta2
    correction1 = 1.0 - beta1**state.step
    correction2 = 1.0 - beta2**state.step
    for name in params.names():
        tensor, g = params[name], grads[name]
        m = state.first.get(name, np.zeros_like(tensor.data))
        v = state.second.get(name, np.zeros_like(tensor.data))
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        state.first[name], state.second[name] = m, v
        tensor.data -= lr * (m / correction1) / (np.sqrt(v / correction2) + config.adam_eps)
        tensor.data -= lr * config.weight_decay * tensor.data
    return params


def lr_decay_on_plateau(history: Sequence[float], lr: float, factor: float = 1 / math.sqrt(2)) -> float:
    """Decay lr when the latest validation loss is strictly larger than the one before."""
    if len(history) >= 2 and history[-1] > history[-2]:
        return lr * factor
    return lr


def _weighted_mean(parts: list[tuple[LossBreakdown, int]]) -> LossBreakdown:
    sentences = sum(count for _, count in parts)
    if sentences == 0:
        return LossBreakdown()
    return LossBreakdown(
        total=sum(b.total * n for b, n in parts) / sentences,
        ent_component=sum(b.ent_component * n for b, n in parts) / sentences,
        emb_component=sum(b.emb_component * n for b, n in parts) / sentences,
        token_count=sum(b.token_count for b, _ in parts),
    )


@trace_step
def train_epoch(
    params: ModelParams,
    batches: Sequence[Batch],
    config: TrainConfig,
    strategy: TrainingStrategy,
    store: EmbeddingStore | None,
    adam: AdamState,
    lr: float,
    rng: np.random.Generator,
) -> tuple[ModelParams, LossBreakdown]:
    """One pass: forward with teacher forcing, loss, backward, clip, Adam.

    Returns the sentence-weighted mean breakdown of the batches as seen before
    their own update.
    """
    dropout = Dropout(config.dropout, rng)
    parts = []
    for index, batch in enumerate(batches):
        try:
            with Tape() as tape:
                probs = forward_probs(params, batch, dropout)
                breakdown = combined_loss(probs, batch.decoder_targets, batch.decoder_mask, store, strategy, ref_ids=batch.decoder_ref_targets)
            if not math.isfinite(breakdown.total):
                raise NonFiniteError(f'loss is {breakdown.total}')
            tensors = list(params)
            grads = backward(tape, breakdown.objective, tensors)
            named = {t.name: grads[t] for t in tensors}
            adam_step(params, clip_gradients(named, config.grad_clip), config, adam, lr)
        except NonFiniteError as e:
            raise NonFiniteError(str(e), batch_index=index) from e
        # values only; the objective pins the recorded graph
        parts.append((breakdown.model_copy(update={'objective': None}), batch.size))
    return params, _weighted_mean(parts)


def evaluate_loss(params: ModelParams, batches: Sequence[Batch], strategy: TrainingStrategy, store: EmbeddingStore | None) -> LossBreakdown:
    """Validation breakdown with dropout off and no tape."""
    parts = []
    for batch in batches:
        probs = forward_probs(params, batch, NO_DROPOUT)
        breakdown = combined_loss(probs, batch.decoder_targets, batch.decoder_mask, store, strategy, ref_ids=batch.decoder_ref_targets)
        parts.append((breakdown, batch.size))
    return _weighted_mean(parts)


def write_training_log(path: str | Path, records: Sequence[EpochRecord], header: Mapping[str, object] | None = None) -> None:
    lines = [f'# {key}={value}' for key, value in (header or {}).items()]
    lines.append('# ' + '\t'.join(EpochRecord.COLUMNS))
    lines += [record.to_tsv() for record in records]
    Path(path).write_text('\n'.join(lines) + '\n', encoding='utf-8')


def read_training_log(path: str | Path) -> tuple[dict[str, str], list[EpochRecord]]:
    header, records = {}, []
    for line in Path(path).read_text(encoding='utf-8').splitlines():
        if not line:
            continue
        if line.startswith('#'):
            key, sep, value = line[1:].strip().partition('=')
            if sep:
                header[key] = value
            continue
        records.append(EpochRecord.from_tsv(line))
    return header, records


def select_best_epoch(records: Sequence[EpochRecord], phase: Phase | None = None) -> EpochRecord:
    """Minimum validation loss among epochs of ``phase`` (default: the last logged phase); earliest wins ties."""
    if not records:
        raise ContractViolation('empty training log')
    phase = records[-1].phase if phase is None else phase
    candidates = [r for r in records if r.phase is phase]
    if not candidates:
        raise ContractViolation(f'no epochs of phase {phase.value} in the log')
    return min(candidates, key=lambda r: (r.valid_total, r.epoch))


def _checkpoint(
    out_dir: Path,
    name: str,
    params: ModelParams,
    data: TrainingData,
    record: EpochRecord,
    strategy: TrainingStrategy,
    config: TrainConfig,
) -> CheckpointMeta:
    meta = CheckpointMeta(epoch=record.epoch, valid_loss=record.valid_total, learning_rate=record.lr, phase=record.phase, path=str(out_dir / name))
    state = CheckpointState(meta=meta, strategy_kind=strategy.kind, phase_index=strategy.phase_index, config=config.model_dump())
    save_checkpoint(out_dir / name, params, data.vocab_src, data.vocab_tgt, state)
    return meta


@trace_step
def run_strategy(
    data: TrainingData,
    config: TrainConfig,
    strategy: TrainingStrategy,
    store: EmbeddingStore | None,
    out_dir: str | Path,
    params: ModelParams | None = None,
    log_header: Mapping[str, object] | None = None,
) -> RunResult:
    """Train under a loss schedule within ``config.max_epochs`` total epochs.

    A pre-training phase ends at its first validation plateau (or after
    ``pretrain_epochs``) but always leaves at least one epoch for the final
    phase; the final phase then continues from the best pre-training parameters
    with fresh Adam moments and the current learning rate.
    The best checkpoint minimizes validation loss over the final phase.
    """
    if strategy.requires_embeddings and store is None:
        raise ConfigurationError(f'strategy {strategy.kind.value} needs an embedding store')
    if not data.train:
        raise ConfigurationError('no training batches')
    set_default_dtype(config.dtype)
    out_path = Path(out_dir)
    out_path.mkdir(parents=True, exist_ok=True)
    log_path = out_path / TRAINING_LOG
    header = {**(log_header or {}), 'strategy': strategy.kind.value, **config.model_dump()}

    if params is None:
        params = init_params(data.vocab_src.size, data.vocab_tgt.size, config)
    rng = np.random.default_rng(config.seed)
    adam = AdamState()
    lr = config.learning_rate

    valid_batches = data.valid
    if not valid_batches:
        logger.warning('No validation batches; validation loss and checkpoint selection use the training batches')
        valid_batches = data.train

    if strategy.has_pretraining and config.max_epochs == 1:
        logger.warning('A single epoch leaves no room for pre-training; training the final phase only')
        strategy = strategy.model_copy(update={'phase_index': len(strategy.phases) - 1})

    records: list[EpochRecord] = []
    phase_history: list[float] = []
    best_pre: tuple[float, dict[str, np.ndarray], EpochRecord] | None = None
    best: CheckpointMeta | None = None
    pretrain_meta: CheckpointMeta | None = None

    for epoch in range(1, config.max_epochs + 1):
        phase = strategy.active_phase
        order = rng.permutation(len(data.train))
        _, train_bd = train_epoch(params, [data.train[i] for i in order], config, strategy, store, adam, lr, rng)
        valid_bd = evaluate_loss(params, valid_batches, strategy, store)
        record = EpochRecord(
            epoch=epoch,
            phase=phase,
            train_total=train_bd.total,
            train_ent=train_bd.ent_component,
            train_emb=train_bd.emb_component,
            valid_total=valid_bd.total,
            valid_ent=valid_bd.ent_component,
            valid_emb=valid_bd.emb_component,
            lr=lr,
        )
        records.append(record)
        write_training_log(log_path, records, header)
        logger.info(
            f'epoch {epoch} [{phase.value}] train {train_bd.total:.4f} (ent {train_bd.ent_component:.4f}, emb {train_bd.emb_component:.4f}) '
            f'valid {valid_bd.total:.4f} lr {lr:.6g}'
        )

        improved = not phase_history or valid_bd.total < min(phase_history)
        plateau = bool(phase_history) and valid_bd.total >= phase_history[-1]
        phase_history.append(valid_bd.total)
        decayed = lr_decay_on_plateau(phase_history, lr, config.lr_decay_factor)
        if decayed != lr:
            logger.warning(f'Validation loss rose in epoch {epoch}; learning rate {lr:.6g} -> {decayed:.6g}')
            lr = decayed

        if strategy.in_final_phase:
            if improved:
                best = _checkpoint(out_path, BEST_CHECKPOINT, params, data, record, strategy, config)
            continue

        if improved:
            best_pre = (valid_bd.total, params.snapshot(), record)
        if strategy.pretrain_termination is PretrainTermination.FIXED_EPOCHS:
            done = len(phase_history) >= strategy.pretrain_epochs
        else:
            done = plateau
        remaining = config.max_epochs - epoch
        if remaining >= 1 and (done or remaining == 1):
            _, snapshot, best_record = best_pre
            params.restore(snapshot)
            pretrain_meta = _checkpoint(out_path, PRETRAIN_CHECKPOINT, params, data, best_record, strategy, config)
            strategy = strategy.advance()
            phase_history = []
            # moments of the pre-training objective do not describe the new one
            adam = AdamState()
            logger.info(f'Pre-training ended after epoch {epoch}; continuing from epoch {best_record.epoch} with {strategy.active_phase.value}')

    return RunResult(best=best, records=records, log_path=log_path, pretrain=pretrain_meta)
