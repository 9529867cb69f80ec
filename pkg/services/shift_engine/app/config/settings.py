"""
Process-level settings read from the environment.

A `.env` file next to the working directory is loaded first (python-dotenv), then
the real environment wins. See ENV_GUIDE.md for the variables.
"""
import logging
import os
from typing import Optional

from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError, field_validator

from ..core.errors import ConfigError

LOG_FORMAT = "%(asctime)s [%(name)s] %(levelname)s %(message)s"
LOG_LEVELS = ("debug", "info", "warning", "error")


class Settings(BaseModel):
    log_level: str = "info"
    threads: Optional[int] = Field(default=None, ge=1)

    @field_validator("log_level", mode="before")
    @classmethod
    def _known_level(cls, value):
        value = str(value).strip().lower()
        if value not in LOG_LEVELS:
            raise ValueError(f"must be one of {', '.join(LOG_LEVELS)}")
        return value


ENV_FIELDS = {"LOG_LEVEL": "log_level", "ADVSHIFT_THREADS": "threads"}


def load_settings(dotenv_path: Optional[str] = None) -> Settings:
    load_dotenv(dotenv_path=dotenv_path, override=False)
    raw = {field: os.getenv(var) for var, field in ENV_FIELDS.items() if os.getenv(var) not in (None, "")}
    try:
        return Settings(**raw)
    except ValidationError as e:
        field = str(e.errors()[0]["loc"][0])
        var = next(k for k, v in ENV_FIELDS.items() if v == field)
        raise ConfigError(var, e.errors()[0]["msg"]) from e


def configure_logging(level: str = "info") -> None:
    logging.basicConfig(level=getattr(logging, level.upper(), logging.INFO), format=LOG_FORMAT)
    logging.getLogger("app").setLevel(getattr(logging, level.upper(), logging.INFO))


def resolve_threads(cli_threads: Optional[int], settings: Settings) -> int:
    """ADVSHIFT_THREADS overrides --threads; the default is a single worker."""
    if settings.threads is not None:
        return settings.threads
    if cli_threads is not None:
        if cli_threads < 1:
            raise ConfigError("threads", "must be at least 1")
        return cli_threads
    return 1
