import logging
from pathlib import Path

import pytest
from pydantic import ValidationError

from sr3_toolkit.settings import Settings, configure_logging, get_settings


def test_defaults(tmp_path):
    settings = get_settings()
    assert settings.log_level == "INFO"
    assert settings.seed == 0
    assert settings.max_workers == 1
    assert settings.output_dir == tmp_path / "runs"


def test_environment_overrides(monkeypatch):
    monkeypatch.setenv('SR3_LOG_LEVEL', 'debug')
    monkeypatch.setenv('SR3_SEED', '42')
    monkeypatch.setenv('SR3_MAX_WORKERS', '4')
    monkeypatch.setenv('SR3_OUTPUT_DIR', 'elsewhere')
    get_settings.cache_clear()
    settings = get_settings()
    assert settings.log_level == "DEBUG"
    assert settings.seed == 42
    assert settings.max_workers == 4
    assert settings.output_dir == Path('elsewhere')


def test_settings_are_cached(monkeypatch):
    first = get_settings()
    monkeypatch.setenv('SR3_SEED', '9')
    assert get_settings() is first


def test_invalid_values_are_rejected():
    with pytest.raises(ValidationError):
        Settings(log_level="LOUD")
    with pytest.raises(ValidationError):
        Settings(max_workers=0)
    with pytest.raises(ValidationError):
        Settings(seed=-1)


def test_configure_logging_sets_package_level():
    configure_logging("warning")
    assert logging.getLogger('sr3_toolkit').level == logging.WARNING
    configure_logging()
    assert logging.getLogger('sr3_toolkit').level == logging.INFO
