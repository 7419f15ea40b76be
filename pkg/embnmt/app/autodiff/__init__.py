"""
Copyright ©2025. The Regents of the University of California (Regents). All Rights Reserved.

See LICENSE at the repository root for terms of use, copying and distribution.
"""

from embnmt.app.autodiff.tape import Tape, Tensor, as_tensor, backward

__all__ = ['Tape', 'Tensor', 'as_tensor', 'backward']
