"""
Copyright ©2025. The Regents of the University of California (Regents). All Rights Reserved.

See LICENSE at the repository root for terms of use, copying and distribution.
"""

import math
from enum import Enum
from typing import Any, ClassVar

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class Phase(str, Enum):
    ENT = 'ent'
    EMB = 'emb'
    COMBINED = 'ent+emb'


class StrategyKind(str, Enum):
    ENT_ONLY = 'ent'
    COMBINED = 'combined'
    COMBINED_AFTER_ENT_PRETRAIN = 'combined-after-ent'
    EMB_AFTER_ENT_PRETRAIN = 'emb-after-ent'
    EMB_ONLY = 'emb'


_PHASES = {
    StrategyKind.ENT_ONLY: (Phase.ENT,),
    StrategyKind.COMBINED: (Phase.COMBINED,),
    StrategyKind.COMBINED_AFTER_ENT_PRETRAIN: (Phase.ENT, Phase.COMBINED),
    StrategyKind.EMB_AFTER_ENT_PRETRAIN: (Phase.ENT, Phase.EMB),
    StrategyKind.EMB_ONLY: (Phase.EMB,),
}


class PretrainTermination(str, Enum):
    PLATEAU = 'plateau'
    FIXED_EPOCHS = 'fixed'


class TrainingStrategy(BaseModel):
    """Loss schedule: which objective each phase optimizes and when pre-training ends."""

    kind: StrategyKind = StrategyKind.ENT_ONLY
    pretrain_termination: PretrainTermination = PretrainTermination.PLATEAU
    pretrain_epochs: int | None = Field(default=None, ge=1)
    emb_weight: float = Field(default=1.0, ge=0.0)
    allow_emb_from_scratch: bool = False
    phase_index: int = 0

    @model_validator(mode='after')
    def check_kind(self) -> 'TrainingStrategy':
        if self.kind is StrategyKind.EMB_ONLY and not self.allow_emb_from_scratch:
            raise ValueError('emb-only training from scratch is disabled; set allow_emb_from_scratch to enable it')
        if self.pretrain_termination is PretrainTermination.FIXED_EPOCHS and self.pretrain_epochs is None:
            raise ValueError('fixed pre-training termination needs pretrain_epochs')
        if not 0 <= self.phase_index < len(self.phases):
            raise ValueError(f'phase_index {self.phase_index} out of range for {self.kind.value}')
        return self

    @property
    def phases(self) -> tuple[Phase, ...]:
        return _PHASES[self.kind]

    @property
    def active_phase(self) -> Phase:
        return self.phases[self.phase_index]

    @property
    def final_phase(self) -> Phase:
        return self.phases[-1]

    @property
    def has_pretraining(self) -> bool:
        return len(self.phases) > 1

    @property
    def in_final_phase(self) -> bool:
        return self.phase_index == len(self.phases) - 1

    @property
    def requires_embeddings(self) -> bool:
        return any(phase is not Phase.ENT for phase in self.phases)

    def advance(self) -> 'TrainingStrategy':
        return self.model_copy(update={'phase_index': self.phase_index + 1})


class TrainConfig(BaseModel):
    """Optimization recipe: Adam, clipping, weight decay, dropout and plateau decay."""

    learning_rate: float = Field(default=0.001, gt=0)
    adam_beta1: float = Field(default=0.9, gt=0, lt=1)
    adam_beta2: float = Field(default=0.999, gt=0, lt=1)
    adam_eps: float = Field(default=1e-8, gt=0)
    grad_clip: float = Field(default=5.0, gt=0)
    weight_decay: float = Field(default=1e-6, ge=0)
    dropout: float = Field(default=0.3, ge=0, lt=1)
    lr_decay_factor: float = Field(default=1 / math.sqrt(2), gt=0, le=1)
    batch_size: int = Field(default=64, ge=1)
    hidden_dim: int = Field(default=512, ge=1)
    embed_dim: int = Field(default=512, ge=1)
    max_epochs: int = Field(default=10, ge=1)
    seed: int = 1
    init_scale: float = Field(default=0.08, gt=0)
    dtype: str = 'float64'

    @field_validator('dtype')
    def check_dtype(cls, v: str) -> str:
        if v not in ('float64', 'float32'):
            raise ValueError(f'dtype must be float64 or float32, got {v}')
        return v

    @classmethod
    def from_settings(cls, settings: Any, **overrides: Any) -> 'TrainConfig':
        values = {
            'learning_rate': settings.LEARNING_RATE,
            'adam_beta1': settings.ADAM_BETA1,
            'adam_beta2': settings.ADAM_BETA2,
            'adam_eps': settings.ADAM_EPS,
            'grad_clip': settings.GRAD_CLIP,
            'weight_decay': settings.WEIGHT_DECAY,
            'dropout': settings.DROPOUT,
            'lr_decay_factor': settings.LR_DECAY_FACTOR,
            'batch_size': settings.BATCH_SIZE,
            'hidden_dim': settings.HIDDEN_DIM,
            'embed_dim': settings.EMBED_DIM,
            'max_epochs': settings.MAX_EPOCHS,
            'seed': settings.SEED,
            'dtype': settings.FLOAT_DTYPE,
        }
        values.update(overrides)
        return cls(**values)


class LossBreakdown(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    total: float = 0.0
    ent_component: float = 0.0
    emb_component: float = 0.0
    token_count: int = 0
    # Differentiable total for backward; never serialized
    objective: Any = Field(default=None, exclude=True, repr=False)


class EpochRecord(BaseModel):
    """One line of the training log."""

    epoch: int
    phase: Phase
    train_total: float
    train_ent: float
    train_emb: float
    valid_total: float
    valid_ent: float
    valid_emb: float
    lr: float

    COLUMNS: ClassVar[tuple[str, ...]] = ('epoch', 'phase', 'train_total', 'train_ent', 'train_emb', 'valid_total', 'valid_ent', 'valid_emb', 'lr')

    def to_tsv(self) -> str:
        values = [str(self.epoch), self.phase.value]
        values += [repr(float(getattr(self, column))) for column in self.COLUMNS[2:]]
        return '\t'.join(values)

    @classmethod
    def from_tsv(cls, line: str) -> 'EpochRecord':
        fields = line.rstrip('\n').split('\t')
        if len(fields) != len(cls.COLUMNS):
            raise ValueError(f'expected {len(cls.COLUMNS)} columns, got {len(fields)}')
        return cls(**dict(zip(cls.COLUMNS, fields, strict=True)))


class CheckpointMeta(BaseModel):
    epoch: int
    valid_loss: float
    learning_rate: float
    phase: Phase
    path: str
