"""
Copyright ©2025. The Regents of the University of California (Regents). All Rights Reserved.

See LICENSE at the repository root for terms of use, copying and distribution.
"""

from typing import ClassVar

from pydantic import BaseModel, Field


class NearMissResult(BaseModel):
    accuracy: float = Field(ge=0.0, le=1.0)
    mismatches: int = 0
    hits: int = 0
    zero_mismatch: bool = False


class EvalReport(BaseModel):
    """Scores of one hypothesis file against its references."""

    bleu: float = Field(ge=0.0, le=100.0)
    unk_rate: float = Field(ge=0.0, le=1.0)
    near_miss_accuracy: float | None = Field(default=None, ge=0.0, le=1.0)
    near_miss_positions: int | None = None
    zero_mismatch: bool | None = None
    sentence_count: int = 0

    # Documented key order of both emitted forms
    KEY_ORDER: ClassVar[tuple[str, ...]] = (
        'bleu',
        'unk_rate',
        'near_miss_accuracy',
        'near_miss_positions',
        'zero_mismatch',
        'sentence_count',
    )

    def _items(self) -> list[tuple[str, str]]:
        items = []
        for key in self.KEY_ORDER:
            value = getattr(self, key)
            if value is None:
                continue
            if isinstance(value, bool):
                text = str(value).lower()
            elif isinstance(value, float):
                text = f'{value:.4f}'
            else:
                text = str(value)
            items.append((key, text))
        return items

    def to_text(self) -> str:
        """Flat ``key = value`` block, one key per line."""
        return '\n'.join(f'{key} = {value}' for key, value in self._items())

    def to_record(self) -> str:
        """Single tab-separated ``key=value`` line."""
        return '\t'.join(f'{key}={value}' for key, value in self._items())


class MetricDelta(BaseModel):
    bleu: float
    unk_rate: float
    near_miss_accuracy: float | None = None
