"""Data ingestion and design construction."""

from .columns import (
    ColumnConfig,
    ColumnRole,
    CovarianceConfig,
    FitConfig,
    IvTestConfig,
    LeaveOutConfig,
    OutcomeTransform,
    SingletonPolicy,
    ThresholdRule,
    load_config,
)
from .loader import (
    BuiltDesign,
    apply_transform,
    build_design,
    build_iv_input,
    leave_out_means,
    load_csv,
    prune_collinear,
    read_table,
)

__all__ = [
    "BuiltDesign",
    "ColumnConfig",
    "ColumnRole",
    "CovarianceConfig",
    "FitConfig",
    "IvTestConfig",
    "LeaveOutConfig",
    "OutcomeTransform",
    "SingletonPolicy",
    "ThresholdRule",
    "apply_transform",
    "build_design",
    "build_iv_input",
    "leave_out_means",
    "load_config",
    "load_csv",
    "prune_collinear",
    "read_table",
]
