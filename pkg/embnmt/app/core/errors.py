"""
Copyright ©2025. The Regents of the University of California (Regents). All Rights Reserved.

See LICENSE at the repository root for terms of use, copying and distribution.
"""

"""Exception hierarchy shared by every embnmt module."""


class EmbNmtError(Exception):
    """Base class for all errors raised by embnmt."""


class CorpusStructureError(EmbNmtError):
    """Parallel inputs do not line up (line counts, sentence counts)."""


class EmbeddingFormatError(EmbNmtError):
    """A textual embedding file violates the expected format."""

    def __init__(self, message: str, line_number: int | None = None):
        self.line_number = line_number
        if line_number is not None:
            message = f'line {line_number}: {message}'
        super().__init__(message)


class VocabRangeError(EmbNmtError, IndexError):
    """An id lies outside a vocabulary or embedding table."""


class ContractViolation(EmbNmtError, ValueError):
    """A caller broke an operation precondition (shapes, scalar loss, tape reuse)."""


class NonFiniteError(EmbNmtError, ArithmeticError):
    """NaN or Inf showed up in a value, loss or gradient."""

    def __init__(self, message: str, batch_index: int | None = None):
        self.batch_index = batch_index
        if batch_index is not None:
            message = f'batch {batch_index}: {message}'
        super().__init__(message)


class ConfigurationError(EmbNmtError):
    """The requested run cannot be configured as given."""


class CheckpointIntegrityError(EmbNmtError):
    """A checkpoint is unreadable or inconsistent with its vocabularies."""


class UsageError(EmbNmtError):
    """Bad command-line usage."""
