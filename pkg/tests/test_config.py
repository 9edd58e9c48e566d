import logging
from logging.handlers import RotatingFileHandler

import pytest

import src.config as numerics
from config import Config, DevelopmentConfig, ProductionConfig, TestingConfig, get_config
from src.cli import GenConfig
from src.debug_utils import format_summary
from src.errors import (
    CorruptInputError,
    DegenerateInputError,
    FeatureMapMismatchError,
    GenerationError,
    InvalidArgumentError,
    RandsmapError,
    TuningError,
)


@pytest.fixture
def clean_root_logger():
    root = logging.getLogger()
    before = list(root.handlers)
    level = root.level
    yield root
    for handler in list(root.handlers):
        if handler not in before:
            root.removeHandler(handler)
            handler.close()
    root.setLevel(level)


####################
# Environments
####################

@pytest.mark.parametrize("env, expected", [
    ("testing", TestingConfig),
    ("PRODUCTION", ProductionConfig),
    ("development", DevelopmentConfig),
    ("staging", DevelopmentConfig),
])
def test_get_config_follows_environment(monkeypatch, env, expected):
    monkeypatch.setenv("RANDSMAP_ENV", env)
    assert get_config() is expected


def test_console_handler_installed_once(clean_root_logger):
    DevelopmentConfig.init_app()
    DevelopmentConfig.init_app(verbose=True)
    marked = [h for h in clean_root_logger.handlers if getattr(h, "_randsmap", False)]
    assert len(marked) == 1
    assert clean_root_logger.level == logging.DEBUG


def test_production_writes_log_file(tmp_path, monkeypatch, clean_root_logger):
    log_file = tmp_path / "logs" / "randsmap.log"
    monkeypatch.setattr(ProductionConfig, "LOG_FILE", str(log_file))
    ProductionConfig.init_app(verbose=True)
    handlers = [h for h in clean_root_logger.handlers if isinstance(h, RotatingFileHandler)]
    assert len(handlers) == 1
    handlers[0].flush()
    assert "startup" in log_file.read_text()


def test_invalid_numerical_setting(monkeypatch):
    monkeypatch.setattr(numerics, "RANDSMAP_LAMBDA", -1.0)
    with pytest.raises(EnvironmentError, match="RANDSMAP_LAMBDA"):
        numerics.validate_environment()


def test_defaults_are_valid():
    assert numerics.validate_environment()
    assert numerics.RANDSMAP_DELTA_S > 0


def test_run_settings_come_from_numerical_config():
    for cls in (Config, TestingConfig):
        assert not hasattr(cls, "OUTPUT_DIR")
        assert not hasattr(cls, "JOBS")
    defaults = GenConfig(benchmark="swiss")
    assert defaults.output_dir == numerics.RANDSMAP_OUTPUT_DIR
    assert defaults.jobs == numerics.RANDSMAP_JOBS


####################
# Errors
####################

@pytest.mark.parametrize("error, code", [
    (InvalidArgumentError, 2),
    (DegenerateInputError, 2),
    (GenerationError, 3),
    (CorruptInputError, 4),
    (TuningError, 5),
    (FeatureMapMismatchError, 5),
])
def test_exit_codes(error, code):
    assert error.exit_code == code
    assert issubclass(error, RandsmapError)


def test_argument_errors_are_value_errors():
    assert issubclass(InvalidArgumentError, ValueError)


def test_mismatch_message_is_prefixed():
    assert str(FeatureMapMismatchError()) == "feature-map mismatch"
    assert str(FeatureMapMismatchError("seed 3 vs 4")) == "feature-map mismatch: seed 3 vs 4"


def test_format_summary():
    text = format_summary({"name": "lwr", "M": 400, "N": 10, "mass_preserving": True})
    assert text.splitlines()[0] == "📦 lwr"
    assert "   N: 10" in text
    assert "mass_drift" not in text
