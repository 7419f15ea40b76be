"""
Copyright ©2025. The Regents of the University of California (Regents). All Rights Reserved.

See LICENSE at the repository root for terms of use, copying and distribution.
"""

from collections.abc import Callable, Sequence

import numpy as np

from embnmt.app.autodiff.tape import Tape, Tensor
from embnmt.app.core.errors import ContractViolation


def _relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(1.0, abs(analytic))


def _central_difference(loss_fn: Callable[[], Tensor], tensor: Tensor, index: tuple[int, ...], epsilon: float) -> float:
    original = tensor.data[index]
    tensor.data[index] = original + epsilon
    plus = loss_fn().item()
    tensor.data[index] = original - epsilon
    minus = loss_fn().item()
    tensor.data[index] = original
    return (plus - minus) / (2.0 * epsilon)


def finite_difference_check(f: Callable[[Tensor], Tensor], point, epsilon: float = 1e-5) -> float:
    """Max relative error between the tape gradient of scalar ``f`` and central differences.

    The error per coordinate is |analytic - numeric| / max(1, |analytic|).
    """
    if not 0.0 < epsilon < 1.0:
        raise ContractViolation(f'epsilon must be a small positive number, got {epsilon}')
    source = point.data if isinstance(point, Tensor) else point
    x = Tensor(np.array(source, dtype=np.float64), requires_grad=True, dtype=np.float64)
    with Tape() as tape:
        loss = f(x)
    analytic = tape.backward(loss, wrt=[x])[x]

    worst = 0.0
    for index in np.ndindex(x.shape):
        numeric = _central_difference(lambda: f(x), x, index, epsilon)
        worst = max(worst, _relative_error(float(analytic[index]), numeric))
    return worst


def parameter_gradient_check(
    loss_fn: Callable[[], Tensor],
    tensors: Sequence[Tensor],
    epsilon: float = 1e-5,
    coords_per_tensor: int | None = None,
    seed: int = 0,
) -> dict[str, float]:
    """Check tape gradients of ``loss_fn`` w.r.t. several leaf tensors.

    ``loss_fn`` rebuilds the forward pass from the current tensor values. With
    ``coords_per_tensor`` only that many randomly drawn coordinates are checked per
    tensor. Returns the max relative error per tensor name.
    """
    with Tape() as tape:
        loss = loss_fn()
    analytic = tape.backward(loss, wrt=tensors)

    rng = np.random.default_rng(seed)
    report = {}
    for position, tensor in enumerate(tensors):
        indices = list(np.ndindex(tensor.shape))
        if coords_per_tensor is not None and len(indices) > coords_per_tensor:
            chosen = rng.choice(len(indices), size=coords_per_tensor, replace=False)
            indices = [indices[i] for i in sorted(chosen)]
        worst = 0.0
        for index in indices:
            numeric = _central_difference(loss_fn, tensor, index, epsilon)
            worst = max(worst, _relative_error(float(analytic[tensor][index]), numeric))
        report[tensor.name or f'tensor_{position}'] = worst
    return report
