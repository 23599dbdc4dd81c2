"""Process-wide settings using Pydantic Settings"""

from __future__ import annotations

from functools import lru_cache
from pathlib import Path

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

CACHE_FORMAT_VERSION = "v1"


class Settings(BaseSettings):
    """Settings loaded from the environment (``RPR_`` prefix)"""

    model_config = SettingsConfigDict(
        env_prefix="RPR_", case_sensitive=False, extra="ignore"
    )

    cache_dir: Path = Field(
        default=Path("./.rpr-cache"),
        description="Root directory of processed corpus caches",
    )

    def corpus_dir(self, name: str) -> Path:
        """Versioned cache directory of one prepared corpus"""
        return self.cache_dir / name / CACHE_FORMAT_VERSION


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance"""
    return Settings()
