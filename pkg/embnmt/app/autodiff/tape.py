"""
Copyright ©2025. The Regents of the University of California (Regents). All Rights Reserved.

See LICENSE at the repository root for terms of use, copying and distribution.
"""

"""Tensors and the reverse-mode tape.

A Tape records every primitive applied while it is active (``with Tape() as tape``).
The active tape lives in a context variable, so each thread records onto its own
tape. Primitives evaluated with no active tape only compute values.
"""

import contextvars
import logging
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass

import numpy as np

from embnmt.app.core.config_manager import settings
from embnmt.app.core.errors import ContractViolation, NonFiniteError

logger = logging.getLogger(__name__)

_active_tape: contextvars.ContextVar['Tape | None'] = contextvars.ContextVar('embnmt_active_tape', default=None)
_checked_mode: contextvars.ContextVar[bool] = contextvars.ContextVar('embnmt_checked_mode', default=settings.CHECKED_MODE)
_default_dtype = np.dtype(settings.FLOAT_DTYPE)


def default_dtype() -> np.dtype:
    return _default_dtype


def set_default_dtype(dtype: str | np.dtype) -> None:
    """Switch the dtype new tensors are created with (float64 or float32)."""
    global _default_dtype
    resolved = np.dtype(dtype)
    if resolved not in (np.dtype('float64'), np.dtype('float32')):
        raise ContractViolation(f'unsupported tensor dtype {resolved}')
    _default_dtype = resolved


def checked_mode() -> bool:
    return _checked_mode.get()


def set_checked_mode(enabled: bool) -> contextvars.Token:
    return _checked_mode.set(enabled)


class Tensor:
    """Dense row-major array, optionally a differentiable leaf."""

    __slots__ = ('data', 'name', 'requires_grad')

    def __init__(self, data, requires_grad: bool = False, name: str | None = None, dtype=None):
        self.data = np.asarray(data, dtype=dtype or _default_dtype)
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractViolation(f'item() needs a single-element tensor, got shape {self.shape}')
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self) -> str:
        label = f' name={self.name!r}' if self.name else ''
        return f'Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})'

    # Operator sugar; the primitives live in ops.
    def __add__(self, other):
        from embnmt.app.autodiff import ops

        return ops.add(self, other)

    def __radd__(self, other):
        from embnmt.app.autodiff import ops

        return ops.add(other, self)

    def __sub__(self, other):
        from embnmt.app.autodiff import ops

        return ops.sub(self, other)

    def __rsub__(self, other):
        from embnmt.app.autodiff import ops

        return ops.sub(other, self)

    def __mul__(self, other):
        from embnmt.app.autodiff import ops

        if isinstance(other, int | float):
            return ops.scale(self, float(other))
        return ops.mul(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __matmul__(self, other):
        from embnmt.app.autodiff import ops

        return ops.matmul(self, other)

    def __neg__(self):
        from embnmt.app.autodiff import ops

        return ops.scale(self, -1.0)


def as_tensor(value) -> Tensor:
    """Wrap arrays and scalars as constant tensors; tensors pass through."""
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


@dataclass(frozen=True)
class Node:
    """One primitive application: output, inputs and the local vector-Jacobian product."""

    op: str
    output: Tensor
    inputs: tuple[Tensor, ...]
    vjp: Callable[[np.ndarray], Sequence[np.ndarray | None]]


class Tape:
    """Append-only record of primitive applications, consumed by one backward pass."""

    def __init__(self):
        self.nodes: list[Node] = []
        self.consumed = False
        self._token = None

    def __enter__(self) -> 'Tape':
        self._token = _active_tape.set(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        _active_tape.reset(self._token)
        self._token = None

    def __len__(self) -> int:
        return len(self.nodes)

    def record(self, op: str, output: Tensor, inputs: tuple[Tensor, ...], vjp) -> None:
        if self.consumed:
            raise ContractViolation('tape already consumed by backward; record a new forward pass')
        output.requires_grad = True
        self.nodes.append(Node(op, output, inputs, vjp))

    def backward(self, loss: Tensor, wrt: Iterable[Tensor] | None = None) -> dict[Tensor, np.ndarray]:
        return backward(self, loss, wrt)


def active_tape() -> Tape | None:
    return _active_tape.get()


def record(op: str, output: Tensor, inputs: tuple[Tensor, ...], vjp) -> Tensor:
    """Attach ``output`` to the active tape when any input is differentiable."""
    if checked_mode() and not np.all(np.isfinite(output.data)):
        raise NonFiniteError(f'{op} produced non-finite values')
    tape = _active_tape.get()
    if tape is not None and any(t.requires_grad for t in inputs):
        tape.record(op, output, inputs, vjp)
    return output


def backward(tape: Tape, loss: Tensor, wrt: Iterable[Tensor] | None = None) -> dict[Tensor, np.ndarray]:
    """Reverse sweep from a scalar loss.

    Returns gradients for ``wrt`` (unreached tensors get zeros) or, when ``wrt`` is
    None, for every differentiable leaf the loss depends on.
    """
    if loss.size != 1:
        raise ContractViolation(f'backward needs a scalar loss, got shape {loss.shape}')
    if tape.consumed:
        raise ContractViolation('backward already ran on this tape; record a new forward pass')

    position = {id(node.output): i for i, node in enumerate(tape.nodes)}
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    leaves: dict[int, Tensor] = {}

    if id(loss) in position:
        end = position[id(loss)] + 1
    elif loss.requires_grad:
        # The loss itself is a leaf
        end = 0
        leaves[id(loss)] = loss
    else:
        raise ContractViolation('loss is not on the tape')

    for node in reversed(tape.nodes[:end]):
        upstream = grads.pop(id(node.output), None)
        if upstream is None:
            continue
        for tensor, grad in zip(node.inputs, node.vjp(upstream), strict=True):
            if grad is None or not tensor.requires_grad:
                continue
            key = id(tensor)
            grads[key] = grads[key] + grad if key in grads else grad
            if key not in position:
                leaves[key] = tensor

    tape.consumed = True
    targets = list(wrt) if wrt is not None else list(leaves.values())
    return {t: grads.get(id(t), np.zeros_like(t.data)) for t in targets}
