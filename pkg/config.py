"""Configuration management for the Salem measure laboratory.

This module provides centralized configuration management with environment variable support,
validation, and type safety. It holds the numeric constants of every construction, the
sampling and tolerance settings of the measurement harness, and logging/output configuration.
"""

from typing import List
from pydantic import validator, Field
from pydantic_settings import BaseSettings
from pathlib import Path


class Config(BaseSettings):
    """Laboratory configuration with environment variable support and validation."""

    # ─────────────────────────────
    # Application Settings
    # ─────────────────────────────
    APP_NAME: str = Field(default="salem-lab", description="Application name")
    VERSION: str = Field(default="1.0.0", description="Application version")
    DEBUG: bool = Field(default=False, description="Enable debug mode")
    ENVIRONMENT: str = Field(default="development", description="Environment (development/production)")

    # ─────────────────────────────
    # Reproducibility
    # ─────────────────────────────
    MASTER_SEED: int = Field(default=20240601, description="Default 64-bit master seed")
    REPORT_SCHEMA: str = Field(default="salem-lab/1", description="Versioned report/config schema id")

    # ─────────────────────────────
    # Measurement Harness
    # ─────────────────────────────
    BAND_SAMPLES: int = Field(default=256, description="Frequency samples per dyadic band")
    BAND_SAMPLING: str = Field(default="jittered", description="Band sampling mode (jittered/grid/lattice)")
    DISCARD_LOW_BANDS: int = Field(default=2, description="Lowest bands dropped before the decay fit")
    COMPENSATED_SUM_THRESHOLD: int = Field(default=10_000, description="Atom count above which sums are compensated")
    QUADRATURE_MIN_RESOLUTION: int = Field(default=1024, description="Minimum midpoint-rule resolution")
    QUADRATURE_CHUNK: int = Field(default=1 << 18, description="Points per vectorized quadrature chunk")

    # ─────────────────────────────
    # Convolution Cantor
    # ─────────────────────────────
    CONVOLUTION_C: float = Field(default=4.0, description="Constant C in the a_r_min threshold (C r)^(-2d)")
    CONVOLUTION_RETRY_CAP: int = Field(default=10_000, description="Point-sampling retry cap")
    CONVOLUTION_MAX_LEVELS: int = Field(default=12, description="Atom-count guard on the number of levels")
    ENUMERATION_BUDGET: int = Field(default=100_000_000, description="Integer-vector enumeration guard")

    # ─────────────────────────────
    # Dyadic Cantor
    # ─────────────────────────────
    CANTOR_RETRY_CAP: int = Field(default=64, description="Bernstein rejection retry cap")
    CANTOR_ON_CAP: str = Field(default="flag", description="Retry-cap policy (flag/raise)")
    CANTOR_INCREMENT_C: float = Field(default=32.0, description="Constant C of the normalized coefficient-increment bound")
    CANTOR_INCREMENT_EPS: float = Field(default=0.0, description="Exponent slack eps of the increment bound")

    # ─────────────────────────────
    # Brownian Images
    # ─────────────────────────────
    BROWNIAN_LEVELS: int = Field(default=24, description="Base measure depth J")
    BROWNIAN_PATHS: int = Field(default=400, description="Monte Carlo replicas")

    # ─────────────────────────────
    # Diophantine Construction
    # ─────────────────────────────
    KAUFMAN_Q: List[float] = Field(default=[1e4, 1e7], description="Desk-scale q schedule")
    KAUFMAN_CS: float = Field(default=0.0, description="C_s override (0 = calibrate)")
    KAUFMAN_TAIL_TOL: float = Field(default=1e-8, description="Tail budget of the outer 2φ(2x) factor")
    KAUFMAN_INNER_TAIL_TOL: float = Field(default=1e-4, description="Tail budget of inner factors at n ≥ 2")
    KAUFMAN_MAX_WINDOW: int = Field(default=1 << 23, description="Largest coefficient window per level")

    # ─────────────────────────────
    # Arc Measure
    # ─────────────────────────────
    ARC_TOL: float = Field(default=1e-10, description="Default adaptive quadrature tolerance")
    ARC_MAX_DEPTH: int = Field(default=60, description="Adaptive bisection depth limit")
    ARC_MAX_FREQUENCY: float = Field(default=1e6, description="Largest |ξ| accepted")

    # ─────────────────────────────
    # Timezone Configuration
    # ─────────────────────────────
    TIMEZONE: str = Field(default="UTC", description="Timezone for log timestamps")

    # ─────────────────────────────
    # Logging Configuration
    # ─────────────────────────────
    LOG_LEVEL: str = Field(default="INFO", description="Logging level")
    LOG_FILE_ENABLED: bool = Field(default=True, description="Enable file logging")
    LOG_FILE_PATH: str = Field(default="logs", description="Log file directory")
    LOG_FILE_MAX_SIZE: int = Field(default=10 * 1024 * 1024, description="Max log file size in bytes (10MB)")
    LOG_FILE_BACKUP_COUNT: int = Field(default=5, description="Number of log file backups")

    # Performance logging
    PERFORMANCE_LOG_ENABLED: bool = Field(default=True, description="Enable performance logging")
    PERFORMANCE_LOG_THRESHOLD: float = Field(default=1.0, description="Performance log threshold in seconds")

    # ─────────────────────────────
    # Output
    # ─────────────────────────────
    OUTPUT_DIR: str = Field(default="reports", description="Default report directory")

    class Config:
        """Pydantic configuration."""
        env_file = ".env"
        env_file_encoding = "utf-8"
        case_sensitive = True

    # ─────────────────────────────
    # Validators
    # ─────────────────────────────
    @validator("BAND_SAMPLES")
    def validate_band_samples(cls, v):
        """Validate band sample count."""
        if v < 16:
            raise ValueError("Band samples must be at least 16")
        return v

    @validator("BAND_SAMPLING")
    def validate_band_sampling(cls, v):
        """Validate band sampling mode."""
        if v.lower() not in ("jittered", "grid", "lattice"):
            raise ValueError("Band sampling must be one of: ['jittered', 'grid', 'lattice']")
        return v.lower()

    @validator("CANTOR_INCREMENT_C")
    def validate_increment_c(cls, v):
        """Validate the increment constant."""
        if not v > 0:
            raise ValueError("Increment constant must be positive")
        return v

    @validator("CANTOR_ON_CAP")
    def validate_on_cap(cls, v):
        """Validate retry-cap policy."""
        if v.lower() not in ("flag", "raise"):
            raise ValueError("Retry-cap policy must be one of: ['flag', 'raise']")
        return v.lower()

    @validator("KAUFMAN_Q")
    def validate_q_schedule(cls, v):
        """Validate the q schedule is increasing."""
        if not v or any(q <= 1 for q in v):
            raise ValueError("q schedule entries must exceed 1")
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("q schedule must be strictly increasing")
        return v

    @validator("LOG_LEVEL")
    def validate_log_level(cls, v):
        """Validate log level."""
        valid_levels = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
        if v.upper() not in valid_levels:
            raise ValueError(f"Log level must be one of: {valid_levels}")
        return v.upper()

    @validator("ENVIRONMENT")
    def validate_environment(cls, v):
        """Validate environment."""
        valid_envs = ["development", "staging", "production"]
        if v.lower() not in valid_envs:
            raise ValueError(f"Environment must be one of: {valid_envs}")
        return v.lower()

    # ─────────────────────────────
    # Computed Properties
    # ─────────────────────────────
    @property
    def is_production(self) -> bool:
        """Check if running in production environment."""
        return self.ENVIRONMENT == "production"

    @property
    def log_file_directory(self) -> Path:
        """Get log file directory path."""
        return Path(self.LOG_FILE_PATH)

    @property
    def output_directory(self) -> Path:
        """Get report directory path."""
        return Path(self.OUTPUT_DIR)

    # ─────────────────────────────
    # Utility Methods
    # ─────────────────────────────
    def create_directories(self) -> None:
        """Create necessary directories."""
        if self.LOG_FILE_ENABLED:
            self.log_file_directory.mkdir(parents=True, exist_ok=True)

    def validate_configuration(self) -> List[str]:
        """Validate configuration and return list of warnings."""
        warnings = []

        if self.is_production and self.DEBUG:
            warnings.append("Debug mode enabled in production")

        if self.KAUFMAN_INNER_TAIL_TOL > 1e-3:
            warnings.append("Inner tail tolerance above 1e-3; level-2 coefficients are coarse")

        if len(self.KAUFMAN_Q) > 2:
            warnings.append("q schedules beyond two levels exceed desk-scale budgets")

        if self.BAND_SAMPLING == "grid" and self.BAND_SAMPLES < 64:
            warnings.append("Grid sampling with few samples aliases against periodic structure")

        return warnings


# ─────────────────────────────
# Global Configuration Instance
# ─────────────────────────────
config = Config()

# Create necessary directories on import
config.create_directories()

# Validate configuration and log warnings
warnings = config.validate_configuration()
if warnings:
    import logging
    logger = logging.getLogger(__name__)
    for warning in warnings:
        logger.warning(f"Configuration warning: {warning}")
