"""
Copyright ©2025. The Regents of the University of California (Regents). All Rights Reserved.

See LICENSE at the repository root for terms of use, copying and distribution.
"""

import pytest
from pydantic import ValidationError

from embnmt.app.config import test as test_config
from embnmt.app.config.development import DevelopmentSettings
from embnmt.app.core.config_manager import ConfigManager, Settings, load_config_file, settings
from embnmt.app.core.errors import ConfigurationError
from embnmt.verify_configs import main as verify_configs


def test_suite_runs_with_test_settings():
    assert settings.APP_ENV == 'test'
    assert settings.HIDDEN_DIM == test_config.TestSettings().HIDDEN_DIM
    assert settings.LOG_TO_FILE is False


@pytest.mark.parametrize(
    'app_env, expected', [('test', test_config.TestSettings), ('development', DevelopmentSettings), ('staging', DevelopmentSettings)]
)
def test_settings_class_follows_app_env(monkeypatch, app_env, expected):
    monkeypatch.setenv('APP_ENV', app_env)
    assert ConfigManager()._get_settings_class() is expected


def test_environment_overrides_defaults(monkeypatch):
    monkeypatch.setenv('APP_ENV', 'test')
    monkeypatch.setenv('EMB_NMT_THREADS', '4')
    monkeypatch.setenv('FLOAT_DTYPE', 'float32')
    loaded = Settings(ConfigManager().load_config())
    assert loaded.EMB_NMT_THREADS == 4
    assert loaded.FLOAT_DTYPE == 'float32'


def test_keyword_overrides_win(monkeypatch):
    monkeypatch.setenv('APP_ENV', 'test')
    monkeypatch.setenv('MAX_EPOCHS', '7')
    assert ConfigManager().load_config(MAX_EPOCHS=2).MAX_EPOCHS == 2


def test_settings_validation(monkeypatch):
    monkeypatch.setenv('APP_ENV', 'test')
    with pytest.raises(ValidationError):
        ConfigManager().load_config(FLOAT_DTYPE='float16')
    # Thread count is clamped to at least one worker
    assert ConfigManager().load_config(EMB_NMT_THREADS=0).EMB_NMT_THREADS == 1


def test_local_configs_dir(monkeypatch, tmp_path):
    (tmp_path / '.env').write_text('MAX_TOKENS=33\n')
    (tmp_path / '.env.test').write_text('MAX_TOKENS=44\nSEED=9\n')
    monkeypatch.setenv('APP_ENV', 'test')
    monkeypatch.setenv('APP_LOCAL_CONFIGS', str(tmp_path))
    manager = ConfigManager()
    assert manager._find_env_files()[:2] == [str(tmp_path / '.env'), str(tmp_path / '.env.test')]
    loaded = manager.load_config()
    # The environment-specific file is read last
    assert loaded.MAX_TOKENS == 44
    assert loaded.SEED == 9


# Run configuration files


def test_load_config_file(tmp_path):
    path = tmp_path / 'run.cfg'
    path.write_text('# comment\nMAX_EPOCHS = 4\nstrategy=emb-after-ent\n\nembeddings="vectors file.txt"\n')
    assert load_config_file(path) == {'max_epochs': '4', 'strategy': 'emb-after-ent', 'embeddings': 'vectors file.txt'}


def test_load_config_file_errors(tmp_path):
    with pytest.raises(ConfigurationError, match='not found'):
        load_config_file(tmp_path / 'absent.cfg')
    path = tmp_path / 'run.cfg'
    path.write_text('max_epochs=4\nbare_key\n')
    with pytest.raises(ConfigurationError, match='bare_key'):
        load_config_file(path)


def test_verify_configs_prints_effective_settings(capsys):
    verify_configs()
    out = capsys.readouterr().out
    assert 'APP_ENV: test' in out
    assert f'HIDDEN_DIM / EMBED_DIM: {settings.HIDDEN_DIM} / {settings.EMBED_DIM}' in out
