"""
Settings - Environment configuration for the toolkit

Values come from the process environment, optionally seeded from a ``.env``
file in the working directory.
"""

import logging
import os
from functools import lru_cache
from pathlib import Path

from dotenv import load_dotenv
from pydantic import BaseModel, Field, field_validator

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
LOG_LEVELS = ("CRITICAL", "ERROR", "WARNING", "INFO", "DEBUG")


class Settings(BaseModel):
    """Toolkit-wide defaults, overridable through SR3_* environment variables"""
    log_level: str = "INFO"
    seed: int = Field(default=0, ge=0)
    output_dir: Path = Path("runs")
    max_workers: int = Field(default=1, ge=1)

    @field_validator('log_level')
    @classmethod
    def check_level(cls, value: str) -> str:
        value = value.upper()
        if value not in LOG_LEVELS:
            raise ValueError(f"unknown log level '{value}'")
        return value

    @classmethod
    def from_env(cls) -> 'Settings':
        load_dotenv()
        return cls(
            log_level=os.getenv('SR3_LOG_LEVEL', 'INFO'),
            seed=int(os.getenv('SR3_SEED', '0')),
            output_dir=Path(os.getenv('SR3_OUTPUT_DIR', 'runs')),
            max_workers=int(os.getenv('SR3_MAX_WORKERS', '1')),
        )


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    return Settings.from_env()


def configure_logging(level: str = None) -> None:
    """Install the toolkit log format on the root logger"""
    level = (level or get_settings().log_level).upper()
    logging.basicConfig(level=level, format=LOG_FORMAT, force=True)
    logging.getLogger('sr3_toolkit').setLevel(level)
