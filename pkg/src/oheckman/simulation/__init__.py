"""Monte Carlo designs and replication studies."""

from .dgp import (
    STUDY_I_PROPORTIONS,
    STUDY_II_PROPORTIONS,
    DgpConfig,
    assign_stages,
    dgp_spec,
    draw_errors,
    simulate_dgp,
    stage_counts,
)
from .study import (
    DEFAULT_TAUS,
    STUDY_GRIDS,
    TRUE_BETA1,
    CellSummary,
    EstimateSummary,
    McStudyResult,
    Study,
    imputation_key,
    replicate,
    run_study,
    study_estimators,
)
from .tables import emit_table, parse_table_csv, table_columns

__all__ = [
    "DEFAULT_TAUS",
    "STUDY_GRIDS",
    "STUDY_I_PROPORTIONS",
    "STUDY_II_PROPORTIONS",
    "TRUE_BETA1",
    "CellSummary",
    "DgpConfig",
    "EstimateSummary",
    "McStudyResult",
    "Study",
    "assign_stages",
    "dgp_spec",
    "draw_errors",
    "emit_table",
    "imputation_key",
    "parse_table_csv",
    "replicate",
    "run_study",
    "simulate_dgp",
    "stage_counts",
    "study_estimators",
    "table_columns",
]
