"""
Copyright ©2025. The Regents of the University of California (Regents). All Rights Reserved.

See LICENSE at the repository root for terms of use, copying and distribution.
"""

import functools
import logging
import time
from collections.abc import Callable
from typing import TypeVar

T = TypeVar('T')

logger = logging.getLogger(__name__)


def trace_step(func: Callable[..., T]) -> Callable[..., T]:
    # Simple tracer for long-running steps: logs entry and wall time.

    @functools.wraps(func)
    def wrapper(*args, **kwargs) -> T:
        func_name = func.__qualname__
        logger.debug(f'trace_step entering {func_name}')
        start_time = time.perf_counter()
        try:
            result = func(*args, **kwargs)
        except Exception as e:
            logger.error(f'{func_name} failed after {time.perf_counter() - start_time:.2f}s: {e}')
            raise
        logger.info(f'{func_name} finished in {time.perf_counter() - start_time:.2f}s')
        return result

    return wrapper
