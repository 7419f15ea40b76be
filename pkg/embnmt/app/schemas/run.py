"""
Copyright ©2025. The Regents of the University of California (Regents). All Rights Reserved.

See LICENSE at the repository root for terms of use, copying and distribution.
"""

from pathlib import Path
from typing import Any

from pydantic import BaseModel, Field

from embnmt.app.schemas.corpus import ToyCorpusSpec
from embnmt.app.schemas.training import TrainConfig, TrainingStrategy


class RunConfig(BaseModel):
    """Effective configuration of one command after flags, config file, env and defaults are merged."""

    command: str
    train: TrainConfig
    strategy: TrainingStrategy | None = None
    toy: ToyCorpusSpec | None = None
    source_vocab_size: int = Field(ge=5)
    target_vocab_size: int = Field(ge=5)
    max_tokens: int = Field(ge=1)
    embeddings: Path | None = None
    oov_reference_vectors: bool = False
    paths: dict[str, Path] = Field(default_factory=dict)
    options: dict[str, Any] = Field(default_factory=dict)

    def echo(self) -> dict[str, str]:
        """Flat key -> value view for the training log header."""
        values = {
            'command': self.command,
            'source_vocab_size': str(self.source_vocab_size),
            'target_vocab_size': str(self.target_vocab_size),
            'max_tokens': str(self.max_tokens),
            'embeddings': str(self.embeddings) if self.embeddings else '',
            'oov_reference_vectors': str(self.oov_reference_vectors).lower(),
        }
        if self.strategy is not None:
            values.update({f'strategy_{key}': str(getattr(value, 'value', value)) for key, value in self.strategy.model_dump().items()})
        values.update({key: str(path) for key, path in self.paths.items()})
        values.update({key: str(value) for key, value in self.options.items()})
        return values
