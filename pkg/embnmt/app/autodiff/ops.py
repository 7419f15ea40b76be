"""
Copyright ©2025. The Regents of the University of California (Regents). All Rights Reserved.

See LICENSE at the repository root for terms of use, copying and distribution.
"""

"""The closed set of differentiable primitives.

Each primitive computes its value with numpy and registers a vector-Jacobian
product on the active tape.
"""

from collections.abc import Sequence

import numpy as np

from embnmt.app.autodiff.tape import Tensor, as_tensor, record
from embnmt.app.core.errors import ContractViolation


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    # Sum a broadcast gradient back down to the operand's shape.
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(op: str, a: Tensor, b: Tensor) -> tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ContractViolation(f'{op}: incompatible shapes {a.shape} and {b.shape}')


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape('add', a, b)
    out = Tensor(a.data + b.data)
    return record('add', out, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape('sub', a, b)
    out = Tensor(a.data - b.data)
    return record('sub', out, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape('mul', a, b)
    out = Tensor(a.data * b.data)
    return record('mul', out, (a, b), lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def scale(x, factor: float) -> Tensor:
    x = as_tensor(x)
    out = Tensor(x.data * factor)
    return record('scale', out, (x,), lambda g: (g * factor,))


def matmul(a, b) -> Tensor:
    """Matrix product; leading batch dimensions broadcast like numpy.matmul."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ContractViolation(f'matmul: incompatible shapes {a.shape} and {b.shape}')
    out = Tensor(np.matmul(a.data, b.data))

    def vjp(g):
        grad_a = np.matmul(g, np.swapaxes(b.data, -1, -2))
        grad_b = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return _unbroadcast(grad_a, a.shape), _unbroadcast(grad_b, b.shape)

    return record('matmul', out, (a, b), vjp)


def tanh(x) -> Tensor:
    x = as_tensor(x)
    value = np.tanh(x.data)
    return record('tanh', Tensor(value), (x,), lambda g: (g * (1.0 - value * value),))


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    # tanh form stays finite for large |x|
    value = 0.5 * (1.0 + np.tanh(0.5 * x.data))
    return record('sigmoid', Tensor(value), (x,), lambda g: (g * value * (1.0 - value),))


def log(x, floor: float | None = None) -> Tensor:
    """Natural log; with ``floor`` the input is clamped from below first."""
    x = as_tensor(x)
    if floor is None:
        if np.any(x.data <= 0):
            raise ContractViolation('log of a non-positive value')
        safe = x.data
        active = np.ones_like(x.data)
    else:
        safe = np.maximum(x.data, floor)
        active = (x.data > floor).astype(x.data.dtype)
    return record('log', Tensor(np.log(safe)), (x,), lambda g: (g * active / safe,))


def softmax(x, axis: int = -1, mask=None) -> Tensor:
    """Softmax along ``axis``; positions where ``mask`` is 0 get probability exactly 0."""
    x = as_tensor(x)
    logits = x.data
    if mask is not None:
        keep = np.broadcast_to(np.asarray(mask, dtype=bool), logits.shape)
        if not np.all(keep.any(axis=axis)):
            raise ContractViolation('softmax over a row with every position masked')
        logits = np.where(keep, logits, -np.inf)
    shifted = logits - np.max(logits, axis=axis, keepdims=True)
    exp = np.exp(shifted)
    value = exp / exp.sum(axis=axis, keepdims=True)

    def vjp(g):
        return (value * (g - (g * value).sum(axis=axis, keepdims=True)),)

    return record('softmax', Tensor(value), (x,), vjp)


def sum(x, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    x = as_tensor(x)
    value = np.sum(x.data, axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return record('sum', Tensor(value), (x,), vjp)


def mean(x, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    count = x.size if axis is None else int(np.prod([x.shape[a] for a in np.atleast_1d(axis)]))
    return scale(sum(x, axis=axis, keepdims=keepdims), 1.0 / count)


def concat(tensors: Sequence, axis: int = -1) -> Tensor:
    parts = [as_tensor(t) for t in tensors]
    if not parts:
        raise ContractViolation('concat of an empty sequence')
    try:
        value = np.concatenate([p.data for p in parts], axis=axis)
    except ValueError:
        raise ContractViolation(f'concat: incompatible shapes {[p.shape for p in parts]} on axis {axis}')
    bounds = np.cumsum([p.shape[axis] for p in parts])[:-1]
    return record('concat', Tensor(value), tuple(parts), lambda g: tuple(np.split(g, bounds, axis=axis)))


def slice(x, index) -> Tensor:  # noqa: A001
    """``x[index]`` for any numpy index (basic slices or integer arrays)."""
    x = as_tensor(x)
    value = np.array(x.data[index])

    def vjp(g):
        full = np.zeros_like(x.data)
        np.add.at(full, index, g)
        return (full,)

    return record('slice', Tensor(value), (x,), vjp)


def reshape(x, shape: tuple[int, ...]) -> Tensor:
    x = as_tensor(x)
    try:
        value = x.data.reshape(shape)
    except ValueError:
        raise ContractViolation(f'reshape: cannot view shape {x.shape} as {shape}')
    return record('reshape', Tensor(value), (x,), lambda g: (g.reshape(x.shape),))


def dropout(x, mask: np.ndarray, p: float) -> Tensor:
    """Inverted dropout with an explicit keep-mask; p=0 is the identity."""
    x = as_tensor(x)
    if not 0.0 <= p < 1.0:
        raise ContractViolation(f'dropout probability must lie in [0, 1), got {p}')
    if p == 0.0:
        return x
    mask = np.asarray(mask, dtype=x.data.dtype)
    if mask.shape != x.shape:
        raise ContractViolation(f'dropout: mask shape {mask.shape} does not match input {x.shape}')
    factor = mask / (1.0 - p)
    return record('dropout', Tensor(x.data * factor), (x,), lambda g: (g * factor,))


def embedding(table, ids) -> Tensor:
    """Row lookup ``table[ids]`` for an integer id array of any shape."""
    table = as_tensor(table)
    ids = np.asarray(ids, dtype=np.int64)
    if table.ndim != 2:
        raise ContractViolation(f'embedding table must be 2-D, got shape {table.shape}')
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise ContractViolation(f'embedding ids outside [0, {table.shape[0]})')
    value = table.data[ids]

    def vjp(g):
        full = np.zeros_like(table.data)
        np.add.at(full, ids, g)
        return (full,)

    return record('embedding', Tensor(value), (table,), vjp)


def transpose(x) -> Tensor:
    """Swap the last two axes."""
    x = as_tensor(x)
    if x.ndim < 2:
        raise ContractViolation(f'transpose needs at least 2 dimensions, got shape {x.shape}')
    value = np.swapaxes(x.data, -1, -2)
    return record('transpose', Tensor(value), (x,), lambda g: (np.swapaxes(g, -1, -2),))
