"""Config file schemas for fits and instrument tests."""

from enum import Enum
from pathlib import Path
from typing import Literal, TypeVar

from pydantic import BaseModel, Field, ValidationError, model_validator

from ..config import EstimatorType
from ..errors import ConfigError
from ..inference import CovarianceMethod


class ColumnRole(str, Enum):
    """Which equations a covariate enters."""

    OUTCOME_SELECTION = "outcome_selection"
    SELECTION_ONLY = "selection_only"


class OutcomeTransform(str, Enum):
    NONE = "none"
    LOG1P = "log1p"
    IHS = "ihs"


class SingletonPolicy(str, Enum):
    """Treatment of observations alone in their leave-out group."""

    DROP = "drop"
    INDICATOR = "indicator"


class LeaveOutConfig(BaseModel):
    """Leave-out stage shares within groups, used as excluded instruments."""

    group_columns: list[str] = Field(min_length=1)
    stage_levels: list[int] = Field(min_length=1)
    singleton_policy: SingletonPolicy = SingletonPolicy.DROP

    @property
    def prefix(self) -> str:
        return "lo_" + "_".join(self.group_columns)


class ColumnConfig(BaseModel):
    """Mapping from CSV columns to the model's stage, outcome and designs."""

    stage_column: str
    n_stages: int | None = Field(default=None, ge=2)
    stage_levels: list[str] | None = Field(
        default=None,
        description="Raw stage labels in stage order; integer codes are expected otherwise",
    )
    outcome_column: str
    outcome_stages: list[int] = Field(min_length=1)
    outcome_transform: OutcomeTransform = OutcomeTransform.NONE
    categorical_columns: dict[str, ColumnRole] = Field(default_factory=dict)
    numeric_columns: dict[str, ColumnRole] = Field(default_factory=dict)
    cluster_column: str | None = None
    weight_column: str | None = None
    intercept: bool = True
    leave_out: list[LeaveOutConfig] = Field(default_factory=list)

    @model_validator(mode="after")
    def _has_exclusion_source(self) -> "ColumnConfig":
        roles = list(self.categorical_columns.values()) + list(self.numeric_columns.values())
        if ColumnRole.SELECTION_ONLY not in roles and not self.leave_out:
            raise ValueError("at least one selection_only column or leave_out block is required")
        overlap = set(self.categorical_columns).intersection(self.numeric_columns)
        if overlap:
            raise ValueError(f"columns listed as both categorical and numeric: {sorted(overlap)}")
        return self

    def resolved_n_stages(self, codes_max: int) -> int:
        if self.n_stages is not None:
            return self.n_stages
        if self.stage_levels is not None:
            return len(self.stage_levels)
        return codes_max + 1


class CovarianceConfig(BaseModel):
    method: CovarianceMethod = CovarianceMethod.OBSERVED_INFORMATION
    small_sample_correction: bool = True


class FitConfig(BaseModel):
    """Everything `oheckman fit` needs besides the data file."""

    columns: ColumnConfig
    estimator: EstimatorType = EstimatorType.OHECKMAN
    tau: float = Field(default=0.5, gt=0.0, lt=1.0)
    covariance: CovarianceConfig = Field(default_factory=CovarianceConfig)
    exp_beta: list[str] = Field(default_factory=list)
    equal_coefficients: list[tuple[str, str]] = Field(default_factory=list)
    profile_indicator: str | None = Field(
        default=None,
        description="Selection column switched 0/1 for the predicted stage-share rows",
    )


class ThresholdRule(BaseModel):
    threshold: float


class IvTestConfig(BaseModel):
    """Columns and binarization rules of `oheckman ivtest`."""

    outcome_column: str
    stage_column: str
    stage_levels: list[str] | None = None
    selected_stages: list[int] = Field(min_length=1)
    instrument_column: str
    instrument_rule: Literal["median_split"] | ThresholdRule = "median_split"
    outcome_transform: OutcomeTransform = OutcomeTransform.NONE
    bins: int | None = Field(default=None, ge=1)
    draws: int | None = Field(default=None, ge=2)

    @property
    def rule(self) -> str | float:
        if isinstance(self.instrument_rule, ThresholdRule):
            return self.instrument_rule.threshold
        return self.instrument_rule


ConfigT = TypeVar("ConfigT", bound=BaseModel)


def load_config(path: str | Path, model: type[ConfigT]) -> ConfigT:
    """Parse a JSON config file into ``model``.

    Raises:
        ConfigError: if the file is missing or fails validation
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        return model.model_validate_json(text)
    except ValidationError as exc:
        raise ConfigError(f"invalid config {path}: {exc}") from exc
