"""Configuration for oheckman."""

from enum import Enum

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class EstimatorType(str, Enum):
    """Estimators selectable by name."""

    OLS = "ols"
    OPROBIT = "oprobit"
    OHECKMAN = "oheckman"
    HECKMAN2 = "heckman2"
    TWOSTEP = "twostep"
    IMPUTATION = "imputation"


class Settings(BaseSettings):
    """Numerical and runtime settings shared by all estimators."""

    model_config = SettingsConfigDict(
        env_prefix="OHECKMAN_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    # Optimizer
    max_iter: int = Field(
        default=500,
        description="Maximum quasi-Newton iterations for likelihood fits",
    )
    gradient_tol: float = Field(
        default=1e-6,
        description="Convergence when max|gradient| < gradient_tol * max(1, |loglik|/n)",
    )
    hessian_step: float = Field(
        default=1e-5,
        description="Central finite-difference step (packed scale) for the Hessian",
    )
    rho_start_clip: float = Field(
        default=0.95,
        description="Two-step rho starting values are clipped to [-clip, clip]",
    )
    boundary_rho: float = Field(
        default=0.99,
        description="|rho| above this value raises the boundary flag",
    )

    # Likelihood guards
    loglik_floor: float = Field(
        default=1e-300,
        description="Likelihood contributions are floored at log(loglik_floor)",
    )
    mills_min_denominator: float = Field(
        default=1e-12,
        description="Two-step rows with a smaller Mills denominator are dropped",
    )

    # Data preparation
    collinearity_tol: float = Field(
        default=1e-8,
        description="Relative tolerance of the pivoted-QR rank detection",
    )

    # Instrument test
    iv_bins: int = Field(
        default=10,
        description="Equal-mass outcome bins for the probability constraints",
    )
    iv_draws: int = Field(
        default=10000,
        description="Bootstrap draws for the instrument validity test",
    )

    # Simulation
    replications: int = Field(
        default=1000,
        description="Default Monte Carlo replications per grid cell",
    )
    threads: int = Field(
        default=1,
        description="Worker processes for replications and bootstrap draws",
    )
    seed: int = Field(
        default=20240607,
        description="Master seed when none is given",
    )
    failure_share_flag: float = Field(
        default=0.01,
        description="Cells with a larger share of failed fits are flagged",
    )

    # Output
    significant_digits: int = Field(
        default=4,
        description="Digits printed in human-readable tables",
    )


# Global settings instance
_settings: Settings | None = None


def get_settings() -> Settings:
    """Get the global settings instance."""
    global _settings
    if _settings is None:
        _settings = Settings()
    return _settings


def configure(settings: Settings) -> None:
    """Replace the global settings instance."""
    global _settings
    _settings = settings
