"""
Copyright ©2025. The Regents of the University of California (Regents). All Rights Reserved.

See LICENSE at the repository root for terms of use, copying and distribution.
"""

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class SentencePair(BaseModel):
    model_config = ConfigDict(frozen=True)

    source: tuple[str, ...]
    target: tuple[str, ...]

    @field_validator('source', 'target')
    def check_tokens(cls, tokens: tuple[str, ...]) -> tuple[str, ...]:
        if not tokens:
            raise ValueError('sentence side must contain at least one token')
        for token in tokens:
            if not token or any(ch.isspace() for ch in token):
                raise ValueError(f'invalid token {token!r}')
        return tokens


class ParallelCorpus(BaseModel):
    name: str = 'corpus'
    pairs: list[SentencePair] = []

    def __len__(self) -> int:
        return len(self.pairs)

    def sources(self) -> list[tuple[str, ...]]:
        return [pair.source for pair in self.pairs]

    def targets(self) -> list[tuple[str, ...]]:
        return [pair.target for pair in self.pairs]


class ToyCorpusSpec(BaseModel):
    """Shape of a synthetic synonym-cluster corpus."""

    clusters: int = Field(default=10, ge=1)
    cluster_size: int = Field(default=3, ge=1)
    min_len: int = Field(default=3, ge=1)
    max_len: int = Field(default=8, ge=1)
    train_size: int = Field(default=2000, ge=1)
    valid_size: int = Field(default=200, ge=1)
    test_size: int = Field(default=200, ge=1)
    embed_dim: int = Field(default=16, ge=2)
    # Relative frequency of synonym ranks within a cluster; None means geometric decay
    synonym_weights: list[float] | None = None

    @model_validator(mode='after')
    def check_consistency(self) -> 'ToyCorpusSpec':
        if self.min_len > self.max_len:
            raise ValueError(f'min_len {self.min_len} exceeds max_len {self.max_len}')
        if self.synonym_weights is not None:
            if len(self.synonym_weights) != self.cluster_size:
                raise ValueError('synonym_weights needs one weight per synonym')
            if any(w <= 0 for w in self.synonym_weights):
                raise ValueError('synonym_weights must be positive')
        return self

    def rank_weights(self) -> list[float]:
        weights = self.synonym_weights or [0.5**rank for rank in range(self.cluster_size)]
        total = sum(weights)
        return [w / total for w in weights]
