"""
Copyright ©2025. The Regents of the University of California (Regents). All Rights Reserved.

See LICENSE at the repository root for terms of use, copying and distribution.
"""

import os
from pathlib import Path
from typing import Any

from dotenv import dotenv_values
from pydantic_settings import BaseSettings

from embnmt.app.config.development import DevelopmentSettings
from embnmt.app.config.test import TestSettings
from embnmt.app.core.errors import ConfigurationError


class ConfigManager:
    """Config manager that implements the configuration precedence scheme."""

    def __init__(self):
        self.app_env = os.environ.get('APP_ENV', 'development').lower()
        self.local_configs_dir = os.environ.get('APP_LOCAL_CONFIGS')
        self.root_dir = Path(__file__).resolve().parent.parent.parent.parent
        self.settings = None

    def _get_settings_class(self) -> type[BaseSettings]:
        # Get the appropriate settings class based on APP_ENV.
        if self.app_env == 'test':
            return TestSettings
        else:
            # Default to development if unknown environment
            return DevelopmentSettings

    def _find_env_files(self) -> list[str]:
        """Find .env files in the following order.

        1. .env in APP_LOCAL_CONFIGS
        2. .env.{APP_ENV} in APP_LOCAL_CONFIGS
        3. .env in the repository root
        4. .env.{APP_ENV} in the repository root
        """
        env_files = []

        if self.local_configs_dir:
            local_configs_path = Path(self.local_configs_dir)
            for name in ('.env', f'.env.{self.app_env}'):
                candidate = local_configs_path / name
                if candidate.exists():
                    env_files.append(str(candidate))

        # Fall back to the repository root when APP_LOCAL_CONFIGS did not supply both
        if len(env_files) < 2:
            for name in ('.env', f'.env.{self.app_env}'):
                candidate = self.root_dir / name
                if candidate.exists():
                    env_files.append(str(candidate))

        return env_files

    def load_config(self, **overrides: Any) -> BaseSettings:
        # Keyword overrides win over environment variables and .env files.
        settings_class = self._get_settings_class()
        env_files = self._find_env_files()
        settings = settings_class(
            _env_file=env_files,
            APP_ENV=self.app_env,
            **overrides,
        )
        self.settings = settings
        return settings


def load_config_file(path: str | Path) -> dict[str, str]:
    """Read a flat key=value run configuration file ('#' starts a comment).

    Keys are normalized to lower case; values stay strings and are validated
    by the schema they end up in.
    """
    config_path = Path(path)
    if not config_path.is_file():
        raise ConfigurationError(f'config file not found: {config_path}')
    values = dotenv_values(config_path, encoding='utf-8')
    parsed = {}
    for key, value in values.items():
        if value is None:
            raise ConfigurationError(f'config key {key!r} in {config_path} has no value')
        parsed[key.strip().lower()] = value.strip()
    return parsed


# Settings class for direct use in applications
class Settings:
    """Settings class that provides access to configuration values.

    This is a wrapper around the BaseSettings instance created by ConfigManager.
    """

    def __init__(self, config_settings=None):
        if config_settings is None:
            config_manager = ConfigManager()
            config_settings = config_manager.load_config()

        # Set all attributes from the config settings
        for key, value in config_settings.model_dump().items():
            setattr(self, key, value)


# Create settings instance
settings = Settings()

# Export settings for direct use without touching the settings object
PROJECT_NAME: str = settings.PROJECT_NAME
VERSION: str = settings.VERSION
ENVIRONMENT: str = settings.ENVIRONMENT
APP_ENV: str | None = settings.APP_ENV
LOG_TO_FILE: bool = settings.LOG_TO_FILE
LOGGING_FORMAT: str = settings.LOGGING_FORMAT
LOGGING_LOCATION: str = settings.LOGGING_LOCATION
LOGGING_LEVEL: str = settings.LOGGING_LEVEL
FLOAT_DTYPE: str = settings.FLOAT_DTYPE
CHECKED_MODE: bool = settings.CHECKED_MODE
EMB_NMT_THREADS: int = settings.EMB_NMT_THREADS
