"""
Copyright ©2025. The Regents of the University of California (Regents). All Rights Reserved.

See LICENSE at the repository root for terms of use, copying and distribution.
"""

import math

from pydantic import field_validator
from pydantic_settings import BaseSettings


class DefaultSettings(BaseSettings):
    """Default application settings."""

    # CORE SETTINGS
    PROJECT_NAME: str = 'embnmt'
    VERSION: str = '1.0.0'

    # Application settings
    ENVIRONMENT: str = 'development'
    APP_ENV: str | None = None

    # Logging settings
    LOG_TO_FILE: bool = True
    LOGGING_FORMAT: str = '[%(asctime)s] - %(levelname)s: %(message)s [in %(pathname)s:%(lineno)d]'
    LOGGING_LOCATION: str = 'embnmt.log'
    LOGGING_LEVEL: str = 'INFO'

    # Numerics
    FLOAT_DTYPE: str = 'float64'
    CHECKED_MODE: bool = True
    EMB_NMT_THREADS: int = 1  # 1 keeps runs bit-reproducible

    # Optimizer and schedule
    LEARNING_RATE: float = 0.001
    ADAM_BETA1: float = 0.9
    ADAM_BETA2: float = 0.999
    ADAM_EPS: float = 1e-8
    GRAD_CLIP: float = 5.0
    WEIGHT_DECAY: float = 1e-6
    DROPOUT: float = 0.3
    LR_DECAY_FACTOR: float = 1 / math.sqrt(2)

    # Model and data shape
    BATCH_SIZE: int = 64
    HIDDEN_DIM: int = 512
    EMBED_DIM: int = 512
    MAX_EPOCHS: int = 10
    SEED: int = 1
    MAX_TOKENS: int = 60
    SOURCE_VOCAB_SIZE: int = 20000
    TARGET_VOCAB_SIZE: int = 10000

    # Loss
    EMB_WEIGHT: float = 1.0
    DISTANCE_CACHE_PRECOMPUTE_LIMIT: int = 5000
    DISTANCE_DTYPE: str = 'float64'

    @field_validator('FLOAT_DTYPE', 'DISTANCE_DTYPE')
    def check_float_dtype(cls, v: str) -> str:
        """Only double and single precision are supported."""
        if v not in ('float64', 'float32'):
            raise ValueError(f'dtype must be float64 or float32, got {v}')
        return v

    @field_validator('EMB_NMT_THREADS')
    def check_threads(cls, v: int) -> int:
        return max(1, v)

    model_config = {
        'extra': 'allow',
    }
