"""
Toolkit configuration via pydantic-settings.

Every tolerance, cap, seed and output option can be set from the environment
or a .env file; field names double as variable names, case-insensitive.
"""

from __future__ import annotations

from enum import Enum
from functools import lru_cache
from typing import Optional

from pydantic import Field, field_validator, model_validator
from pydantic_settings import BaseSettings


class Environment(str, Enum):
    """Deployment environment."""

    DEVELOPMENT = "development"
    STAGING = "staging"
    PRODUCTION = "production"


class LogLevel(str, Enum):
    """Supported log levels."""

    DEBUG = "DEBUG"
    INFO = "INFO"
    WARNING = "WARNING"
    ERROR = "ERROR"
    CRITICAL = "CRITICAL"


class Settings(BaseSettings):
    """Tolerances, caps, seeds and output options."""

    # --- Application ---
    app_name: str = "Synchronous Correlation Slices"
    app_version: str = "1.0.0"
    environment: Environment = Environment.DEVELOPMENT
    debug: bool = Field(default=False, description="Log at DEBUG unless a level is given")

    # --- Tolerances ---
    validation_tol: float = Field(
        default=1e-9, gt=0.0, le=1e-3, description="Tolerance for every linear constraint"
    )
    operator_tol: float = Field(
        default=1e-12, gt=0.0, le=1e-6, description="Projection and relation residual tolerance"
    )
    slice_residual_tol: float = Field(
        default=1e-10, gt=0.0, le=1e-4, description="Largest LP residual a slice value may carry"
    )
    pvm_tol: float = Field(
        default=1e-10, gt=0.0, le=1e-4, description="PVM residual accepted when synthesizing"
    )

    # --- Tracial models ---
    max_total_dim: int = Field(default=32, ge=1, le=256, description="Cap on the sum of block dims")

    # --- Linear programs ---
    lp_max_atoms: int = Field(default=16, ge=1, le=24)
    lp_tie_tol: float = Field(default=1e-12, ge=0.0)

    # --- Sampling oracle ---
    sample_count: int = Field(default=10_000, ge=1)
    sample_dim: int = Field(default=4, ge=1)
    sample_seed: int = 1
    sample_max_blocks: int = Field(default=3, ge=1)
    sample_chunk_size: int = Field(default=1024, ge=1, description="Samples per seeded stream")
    sample_workers: int = Field(default=1, ge=1)

    # --- Dominance checks ---
    dominance_delta: float = Field(default=0.02, gt=0.0, le=0.5)
    dominance_tol: float = Field(default=1e-9, ge=0.0)
    query_count: int = Field(default=200, ge=1)
    query_seed: int = 7

    # --- Output ---
    float_digits: int = Field(default=17, ge=1, le=17)
    table_digits: int = Field(default=6, ge=1, le=17)

    # --- Logging ---
    log_level: LogLevel = LogLevel.WARNING
    log_format: str = "json"
    log_file: Optional[str] = None

    @field_validator("log_format")
    @classmethod
    def validate_log_format(cls, v: str) -> str:
        """Only the two supported formatters are accepted."""
        if v not in ("json", "text"):
            raise ValueError(f"log_format must be 'json' or 'text', got {v!r}")
        return v

    @model_validator(mode="after")
    def validate_sampling_caps(self) -> "Settings":
        """Ensure sampled block algebras stay under the dimension cap."""
        worst = self.sample_dim * self.sample_max_blocks
        if worst > self.max_total_dim:
            raise ValueError(
                f"sample_dim * sample_max_blocks ({worst}) exceeds max_total_dim "
                f"({self.max_total_dim})"
            )
        return self

    model_config = {
        "env_file": ".env",
        "env_file_encoding": "utf-8",
        "case_sensitive": False,
        "extra": "ignore",
    }


@lru_cache()
def get_settings() -> Settings:
    """
    Get cached application settings.

    Returns:
        Validated Settings instance. Cached after first call.
    """
    return Settings()
