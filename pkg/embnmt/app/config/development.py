"""
Copyright ©2025. The Regents of the University of California (Regents). All Rights Reserved.

See LICENSE at the repository root for terms of use, copying and distribution.
"""

from embnmt.app.config.default import DefaultSettings


class DevelopmentSettings(DefaultSettings):
    """Development-specific settings.

    These settings override default settings for the development environment.
    """

    LOGGING_LEVEL: str = 'DEBUG'
    ENVIRONMENT: str = 'development'
