"""
Copyright ©2025. The Regents of the University of California (Regents). All Rights Reserved.

See LICENSE at the repository root for terms of use, copying and distribution.
"""

from embnmt.app.config.default import DefaultSettings


class TestSettings(DefaultSettings):
    """Test-specific settings.

    Small model dimensions and no log file, so the suite runs at desk scale.
    """

    LOGGING_LEVEL: str = 'DEBUG'
    LOG_TO_FILE: bool = False
    ENVIRONMENT: str = 'test'

    HIDDEN_DIM: int = 16
    EMBED_DIM: int = 16
    BATCH_SIZE: int = 8
    MAX_EPOCHS: int = 3
