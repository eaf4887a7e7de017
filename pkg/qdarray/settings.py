"""Runtime Settings

Process-level settings read from the environment (prefix ``QDARRAY_``) or a
``.env`` file, plus the logging setup shared by every command.
"""

import logging
from typing import Optional

from pydantic import field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class RuntimeSettings(BaseSettings):
    """Settings that affect how commands run, never what they compute."""
    model_config = SettingsConfigDict(env_prefix="QDARRAY_", env_file=".env", extra="ignore")

    log_level: str = "INFO"
    log_format: str = LOG_FORMAT
    jobs: int = 1
    output_format: str = "table"
    svg_hashsalt: str = "qdarray"

    @field_validator("log_level")
    @classmethod
    def known_level(cls, v: str) -> str:
        v = v.upper()
        if v not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            raise ValueError(f"unknown log level {v}")
        return v

    @field_validator("jobs")
    @classmethod
    def positive_jobs(cls, v: int) -> int:
        if v < 1:
            raise ValueError("jobs must be at least 1")
        return v

    @field_validator("output_format")
    @classmethod
    def known_format(cls, v: str) -> str:
        if v not in ("table", "vector-plot"):
            raise ValueError("output_format must be 'table' or 'vector-plot'")
        return v


def configure_logging(level: str = "INFO", fmt: Optional[str] = None) -> logging.Logger:
    """Attach a single stream handler to the package logger.

    Args:
        level: Logging level name
        fmt: Optional format string

    Returns:
        logging.Logger: The configured ``qdarray`` logger
    """
    logger = logging.getLogger("qdarray")
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter(fmt or LOG_FORMAT))
    logger.addHandler(handler)
    logger.setLevel(level.upper())
    logger.propagate = False
    return logger
