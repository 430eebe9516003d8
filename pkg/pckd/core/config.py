"""Process configuration using pydantic-settings."""

from functools import lru_cache
from pathlib import Path
from typing import Literal

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Process-wide settings loaded from environment variables (prefix ``PCKD_``)."""

    model_config = SettingsConfigDict(
        env_prefix="PCKD_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # Application
    app_name: str = "pckd"
    app_version: str = "0.4.0"
    debug: bool = False

    # Logging
    log_level: str = "INFO"
    log_format: str = "%(asctime)s %(levelname)s %(name)s: %(message)s"

    # Runs
    default_seed: int = 2024
    output_root: Path = Path("runs")

    # Parameter storage precision; gradient checks run in float64
    float_dtype: Literal["float32", "float64"] = "float32"

    @property
    def code_version(self) -> str:
        """Version string written into run manifests."""
        return f"{self.app_name}-{self.app_version}"


@lru_cache
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()


settings = get_settings()
