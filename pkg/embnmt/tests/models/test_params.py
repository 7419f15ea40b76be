"""
Copyright ©2025. The Regents of the University of California (Regents). All Rights Reserved.

See LICENSE at the repository root for terms of use, copying and distribution.
"""

import numpy as np
import pytest

from embnmt.app.autodiff.tape import Tensor
from embnmt.app.core.errors import ContractViolation, NonFiniteError
from embnmt.app.models.params import ModelParams, init_params, parameter_shapes, params_from_arrays


def test_parameter_shapes_layout():
    """Test the canonical names and shapes for S=7, T=9, H=4, E=3."""
    shapes = parameter_shapes(7, 9, 4, 3)
    assert list(shapes)[:2] == ['src_embed', 'tgt_embed']
    assert list(shapes)[-3:] == ['W_p', 'W_c', 'W_s']
    assert shapes['src_embed'] == (7, 3)
    assert shapes['enc_fwd_0_W'] == (3 + 4, 16)
    assert shapes['enc_bwd_1_W'] == (4 + 4, 16)
    assert shapes['dec_0_W'] == (3 + 4 + 4, 16)
    assert shapes['dec_1_b'] == (16,)
    assert shapes['W_p'] == (8, 4)
    assert shapes['W_c'] == (12, 4)
    assert shapes['W_s'] == (9, 4)


def test_init_is_seeded(tiny_config):
    first = init_params(8, 9, tiny_config)
    second = init_params(8, 9, tiny_config)
    other = init_params(8, 9, tiny_config.model_copy(update={'seed': 4}))
    for name in first.names():
        assert np.array_equal(first[name].data, second[name].data)
    assert not np.array_equal(first['W_s'].data, other['W_s'].data)


def test_init_range_and_names(tiny_params, tiny_config):
    for tensor in tiny_params:
        assert tensor.requires_grad
        assert tensor.name in tiny_params.names()
        assert np.all(np.abs(tensor.data) <= tiny_config.init_scale)


def test_dimension_properties(tiny_params):
    assert tiny_params.src_vocab_size == 10
    assert tiny_params.tgt_vocab_size == 10
    assert tiny_params.hidden_dim == 4
    assert tiny_params.embed_dim == 3
    assert tiny_params.total_size == sum(int(np.prod(shape)) for shape in parameter_shapes(10, 10, 4, 3).values())


def test_output_rows_must_match_target_vocabulary():
    tensors = {'tgt_embed': Tensor(np.zeros((5, 2))), 'W_s': Tensor(np.zeros((6, 3)))}
    with pytest.raises(ContractViolation):
        ModelParams(tensors)


def test_restore_keeps_identity(tiny_params):
    """Test that restoring overwrites values without swapping tensor objects."""
    snapshot = tiny_params.snapshot()
    tensor = tiny_params['W_c']
    tensor.data += 1.0
    tiny_params.restore(snapshot)
    assert tiny_params['W_c'] is tensor
    assert np.array_equal(tensor.data, snapshot['W_c'])


def test_restore_rejects_wrong_shape(tiny_params):
    snapshot = tiny_params.snapshot()
    snapshot['W_c'] = np.zeros((2, 2))
    with pytest.raises(ContractViolation):
        tiny_params.restore(snapshot)


def test_check_finite(tiny_params):
    tiny_params.check_finite()
    tiny_params['dec_0_b'].data[0] = np.nan
    with pytest.raises(NonFiniteError, match='dec_0_b'):
        tiny_params.check_finite()


def test_params_from_arrays_round_trip(tiny_params):
    rebuilt = params_from_arrays(tiny_params.snapshot(), seed=3)
    assert rebuilt.names() == tiny_params.names()
    assert all(t.requires_grad for t in rebuilt)
