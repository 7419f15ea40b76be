"""
Copyright ©2025. The Regents of the University of California (Regents). All Rights Reserved.

See LICENSE at the repository root for terms of use, copying and distribution.
"""

"""Named parameter tensors of the attentional encoder-decoder.

Matrices are stored for row-vector products (``x @ W``):

- ``src_embed`` [S x E], ``tgt_embed`` [T x E]
- ``enc_fwd_{l}_W`` / ``enc_bwd_{l}_W`` [in + H x 4H] with biases ``*_b`` [4H]
- ``dec_{l}_W`` [in + H x 4H]; layer 0 reads the word embedding plus the fed-back vector
- ``W_p`` [2H x H] projects source vectors to attention keys and the initial state
- ``W_c`` [3H x H] combines the context vector with the decoder state
- ``W_s`` [T x H] output layer, one row per target word
"""

from collections.abc import Iterator

import numpy as np

from embnmt.app.autodiff.tape import Tensor
from embnmt.app.core.errors import ContractViolation, NonFiniteError
from embnmt.app.schemas.training import TrainConfig

NUM_LAYERS = 2


def parameter_shapes(src_vocab_size: int, tgt_vocab_size: int, hidden_dim: int, embed_dim: int) -> dict[str, tuple[int, ...]]:
    """Canonical name -> shape map; its order is the checkpoint order."""
    h, e = hidden_dim, embed_dim
    shapes: dict[str, tuple[int, ...]] = {'src_embed': (src_vocab_size, e), 'tgt_embed': (tgt_vocab_size, e)}
    for direction in ('fwd', 'bwd'):
        for layer in range(NUM_LAYERS):
            width = e if layer == 0 else h
            shapes[f'enc_{direction}_{layer}_W'] = (width + h, 4 * h)
            shapes[f'enc_{direction}_{layer}_b'] = (4 * h,)
    for layer in range(NUM_LAYERS):
        width = e + h if layer == 0 else h
        shapes[f'dec_{layer}_W'] = (width + h, 4 * h)
        shapes[f'dec_{layer}_b'] = (4 * h,)
    shapes['W_p'] = (2 * h, h)
    shapes['W_c'] = (3 * h, h)
    shapes['W_s'] = (tgt_vocab_size, h)
    return shapes


class ModelParams:
    """Ordered collection of differentiable parameter tensors."""

    def __init__(self, tensors: dict[str, Tensor], seed: int | None = None):
        if 'W_s' not in tensors or 'tgt_embed' not in tensors:
            raise ContractViolation('parameter set lacks the target embedding or output matrix')
        if tensors['W_s'].shape[0] != tensors['tgt_embed'].shape[0]:
            raise ContractViolation(f'W_s rows {tensors["W_s"].shape[0]} != target vocabulary {tensors["tgt_embed"].shape[0]}')
        self.tensors = tensors
        self.seed = seed

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def __iter__(self) -> Iterator[Tensor]:
        return iter(self.tensors.values())

    def __len__(self) -> int:
        return len(self.tensors)

    def names(self) -> list[str]:
        return list(self.tensors)

    @property
    def src_vocab_size(self) -> int:
        return self.tensors['src_embed'].shape[0]

    @property
    def tgt_vocab_size(self) -> int:
        return self.tensors['W_s'].shape[0]

    @property
    def embed_dim(self) -> int:
        return self.tensors['src_embed'].shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.tensors['W_s'].shape[1]

    @property
    def total_size(self) -> int:
        return sum(t.size for t in self.tensors.values())

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.tensors.items()}

    def restore(self, arrays: dict[str, np.ndarray]) -> None:
        """Overwrite values in place; tensor identities (and optimizer keys) stay put."""
        for name, tensor in self.tensors.items():
            value = arrays[name]
            if value.shape != tensor.shape:
                raise ContractViolation(f'{name}: cannot restore shape {value.shape} into {tensor.shape}')
            tensor.data[...] = value

    def check_finite(self) -> None:
        for name, tensor in self.tensors.items():
            if not np.all(np.isfinite(tensor.data)):
                raise NonFiniteError(f'parameter {name} holds non-finite values')


def init_params(src_vocab_size: int, tgt_vocab_size: int, config: TrainConfig) -> ModelParams:
    """Seeded uniform(-init_scale, init_scale) initialization of every tensor."""
    rng = np.random.default_rng(config.seed)
    shapes = parameter_shapes(src_vocab_size, tgt_vocab_size, config.hidden_dim, config.embed_dim)
    tensors = {
        name: Tensor(rng.uniform(-config.init_scale, config.init_scale, size=shape), requires_grad=True, name=name, dtype=config.dtype)
        for name, shape in shapes.items()
    }
    return ModelParams(tensors, seed=config.seed)


def params_from_arrays(arrays: dict[str, np.ndarray], seed: int | None = None) -> ModelParams:
    tensors = {name: Tensor(value, requires_grad=True, name=name, dtype=value.dtype) for name, value in arrays.items()}
    return ModelParams(tensors, seed=seed)
