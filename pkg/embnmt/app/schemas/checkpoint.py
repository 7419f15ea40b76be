"""
Copyright ©2025. The Regents of the University of California (Regents). All Rights Reserved.

See LICENSE at the repository root for terms of use, copying and distribution.
"""

from typing import Any

from pydantic import BaseModel

from embnmt.app.schemas.training import CheckpointMeta, StrategyKind

FORMAT_VERSION = 1


class TensorEntry(BaseModel):
    name: str
    shape: list[int]
    offset: int  # in bytes, into params.bin


class CheckpointManifest(BaseModel):
    format_version: int = FORMAT_VERSION
    dtype: str = '<f8'
    source_vocab_size: int
    target_vocab_size: int
    hidden_dim: int
    embed_dim: int
    tensors: list[TensorEntry]


class CheckpointState(BaseModel):
    meta: CheckpointMeta
    strategy_kind: StrategyKind
    phase_index: int
    config: dict[str, Any]
