"""CSV ingestion and design construction."""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from scipy import linalg

from ..config import get_settings
from ..errors import ConfigError, DataError
from ..ivtest import IvTestInput, binarize
from ..model.types import INTERCEPT, Dataset, ModelSpec
from .columns import (
    ColumnConfig,
    ColumnRole,
    IvTestConfig,
    LeaveOutConfig,
    OutcomeTransform,
    SingletonPolicy,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BuiltDesign:
    """A dataset ready for estimation plus the provenance of its columns.

    ``registry`` maps every design column to its source column, and
    ``references`` records the omitted level of each categorical.
    """

    dataset: Dataset
    spec: ModelSpec
    registry: dict[str, str]
    references: dict[str, str]
    dropped_rows: int = 0
    pruned: tuple[str, ...] = ()
    roles: dict[str, str] = field(default_factory=dict)

    def registry_json(self) -> str:
        return json.dumps(
            {
                "columns": self.registry,
                "roles": self.roles,
                "references": self.references,
                "pruned": list(self.pruned),
                "dropped_rows": self.dropped_rows,
            },
            indent=2,
        )


def apply_transform(values: np.ndarray, transform: OutcomeTransform | str) -> np.ndarray:
    """log1p, inverse hyperbolic sine or identity; NaN passes through."""
    v = np.asarray(values, dtype=float)
    transform = OutcomeTransform(transform)
    if transform is OutcomeTransform.LOG1P:
        if np.any(v[~np.isnan(v)] <= -1.0):
            raise DataError("log1p transform needs outcomes above -1")
        return np.log1p(v)
    if transform is OutcomeTransform.IHS:
        return np.arcsinh(v)
    return v


def leave_out_means(stages: np.ndarray, groups: np.ndarray, levels: list[int]) -> np.ndarray:
    """Share of the other members of each observation's group at each level.

    Returns an n x len(levels) matrix; rows in singleton groups are NaN.
    """
    stages = np.asarray(stages, dtype=int)
    _, group = np.unique(np.asarray(groups), return_inverse=True)
    group = group.reshape(-1)
    size = np.bincount(group)
    others = (size[group] - 1).astype(float)
    out = np.empty((stages.size, len(levels)))
    with np.errstate(invalid="ignore", divide="ignore"):
        for k, level in enumerate(levels):
            hit = (stages == level).astype(float)
            total = np.bincount(group, weights=hit, minlength=size.size)
            out[:, k] = (total[group] - hit) / others
    out[others == 0] = np.nan
    return out


def _numeric(frame: pd.DataFrame, column: str) -> np.ndarray:
    values = pd.to_numeric(frame[column], errors="coerce")
    bad = values.isna() & frame[column].notna()
    if bad.any():
        raise DataError(f"column {column!r} has non-numeric entries (first row {bad.idxmax()})")
    return values.to_numpy(dtype=float)


def _require_columns(frame: pd.DataFrame, columns: list[str]) -> None:
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise DataError(f"required columns missing from the data: {missing}")


def _stage_codes(raw: pd.Series, levels: list[str] | None) -> np.ndarray:
    if levels is not None:
        lookup = {label: k for k, label in enumerate(levels)}
        text = raw.astype(str)
        unknown = sorted(set(text) - set(lookup))
        if unknown:
            raise DataError(f"unknown stage levels {unknown}")
        return text.map(lookup).to_numpy(dtype=int)
    values = pd.to_numeric(raw, errors="coerce")
    if values.isna().any() or np.any(values != np.round(values)) or np.any(values < 0):
        raise DataError("stage codes must be non-negative integers when stage_levels is unset")
    return values.to_numpy(dtype=int)


def _indicators(raw: pd.Series, name: str) -> tuple[dict[str, np.ndarray], str]:
    text = raw.fillna("<missing>").astype(str)
    counts = text.value_counts()
    # most frequent level; ties go to the first label in sorted order
    reference = sorted(counts.index[counts == counts.max()])[0]
    columns = {
        f"{name}={level}": (text == level).to_numpy(dtype=float)
        for level in sorted(counts.index)
        if level != reference
    }
    return columns, reference


def _stack(columns: dict[str, np.ndarray], rows: np.ndarray) -> np.ndarray:
    if not columns:
        return np.empty((int(rows.sum()), 0))
    return np.column_stack([values[rows] for values in columns.values()])


def _rank_keep(matrix: np.ndarray, tol: float) -> list[int]:
    """Columns spanning ``matrix`` by pivoted QR, in their original order."""
    if matrix.shape[1] == 0:
        return []
    norms = np.linalg.norm(matrix, axis=0)
    scale = float(norms.max()) if norms.size else 0.0
    if scale == 0.0:
        return []
    _, r, pivot = linalg.qr(matrix, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    rank = int(np.sum(diag > tol * diag[0])) if diag.size else 0
    return sorted(int(k) for k in pivot[:rank])


def prune_collinear(
    shared: np.ndarray, selection_only: np.ndarray, tol: float | None = None
) -> tuple[list[int], list[int]]:
    """Kept column indices of the shared and the selection-only blocks.

    Columns are demeaned first, so constants are pruned (the cutoffs absorb
    them). Selection-only columns are judged after projecting out the kept
    shared columns.
    """
    tol = get_settings().collinearity_tol if tol is None else tol
    shared_c = shared - shared.mean(axis=0)
    keep_shared = _rank_keep(shared_c, tol)
    only_c = selection_only - selection_only.mean(axis=0)
    if keep_shared and only_c.shape[1]:
        basis = shared_c[:, keep_shared]
        coef, *_ = np.linalg.lstsq(basis, only_c, rcond=None)
        resid = only_c - basis @ coef
        # columns already spanned by the shared block have tiny residuals
        scale = np.maximum(np.linalg.norm(only_c, axis=0), 1e-300)
        spanned = np.linalg.norm(resid, axis=0) <= tol * scale
        candidates = [k for k in range(only_c.shape[1]) if not spanned[k]]
        kept = _rank_keep(resid[:, candidates], tol) if candidates else []
        keep_only = [candidates[k] for k in kept]
    else:
        keep_only = _rank_keep(only_c, tol)
    return keep_shared, keep_only


def _leave_out_block(
    frame: pd.DataFrame, stage: np.ndarray, block: LeaveOutConfig
) -> tuple[dict[str, np.ndarray], np.ndarray]:
    """Share columns for one leave-out block and the mask of rows to drop."""
    keys = frame[block.group_columns]
    missing_key = keys.isna().any(axis=1).to_numpy()
    groups = keys.astype(str).agg("|".join, axis=1).to_numpy(dtype=object)
    # rows without a group key form their own singleton groups
    for i in np.flatnonzero(missing_key):
        groups[i] = f"<missing>{i}"
    shares = leave_out_means(stage, groups, block.stage_levels)
    undefined = np.isnan(shares).any(axis=1)
    columns = {
        f"{block.prefix}_s{level}": shares[:, k] for k, level in enumerate(block.stage_levels)
    }
    drop = np.zeros(stage.size, dtype=bool)
    if undefined.any():
        if block.singleton_policy is SingletonPolicy.DROP:
            drop = undefined
        else:
            for name in columns:
                columns[name] = np.where(undefined, 0.0, columns[name])
            columns[f"{block.prefix}_missing"] = undefined.astype(float)
        logger.info(
            "leave_out_singletons block=%s rows=%d policy=%s",
            block.prefix,
            int(undefined.sum()),
            block.singleton_policy.value,
        )
    return columns, drop


def build_design(frame: pd.DataFrame, config: ColumnConfig, prune: bool = True) -> BuiltDesign:
    """Turn a raw table into a Dataset following ``config``.

    Raises:
        DataError: on missing columns, unknown stage levels, outcome presence
            that contradicts the outcome stages, or non-numeric values
        ConfigError: if no excluded selection column survives pruning
    """
    required = [config.stage_column, config.outcome_column]
    required += list(config.categorical_columns) + list(config.numeric_columns)
    required += [c for block in config.leave_out for c in block.group_columns]
    required += [c for c in (config.cluster_column, config.weight_column) if c]
    _require_columns(frame, required)

    frame = frame.reset_index(drop=True)
    no_stage = frame[config.stage_column].isna().to_numpy()
    if no_stage.any():
        logger.info("rows_dropped reason=missing_stage rows=%d", int(no_stage.sum()))
        frame = frame.loc[~no_stage].reset_index(drop=True)
    dropped = int(no_stage.sum())

    stage = _stage_codes(frame[config.stage_column], config.stage_levels)
    n_stages = config.resolved_n_stages(int(stage.max()) if stage.size else 0)
    if stage.size and stage.max() >= n_stages:
        raise DataError(f"stage codes must lie in 0..{n_stages - 1}")
    spec_stages = tuple(sorted(config.outcome_stages))

    registry: dict[str, str] = {}
    roles: dict[str, str] = {}
    references: dict[str, str] = {}
    shared: dict[str, np.ndarray] = {}
    only: dict[str, np.ndarray] = {}

    def add(columns: dict[str, np.ndarray], source: str, role: ColumnRole) -> None:
        target = shared if role is ColumnRole.OUTCOME_SELECTION else only
        for name, values in columns.items():
            target[name] = values
            registry[name] = source
            roles[name] = role.value

    for column, role in config.categorical_columns.items():
        indicators, reference = _indicators(frame[column], column)
        references[column] = reference
        add(indicators, column, role)
    for column, role in config.numeric_columns.items():
        values = _numeric(frame, column)
        if np.isnan(values).any():
            raise DataError(f"column {column!r} has missing values")
        add({column: values}, column, role)

    drop = np.zeros(stage.size, dtype=bool)
    for block in config.leave_out:
        columns, block_drop = _leave_out_block(frame, stage, block)
        add(columns, "+".join(block.group_columns), ColumnRole.SELECTION_ONLY)
        drop |= block_drop
    if drop.any():
        logger.info("rows_dropped reason=leave_out_singleton rows=%d", int(drop.sum()))
        dropped += int(drop.sum())
    keep_rows = ~drop

    outcome = _numeric(frame, config.outcome_column)
    carries = np.isin(stage, spec_stages)
    present = ~np.isnan(outcome)
    stray = np.flatnonzero(present & ~carries & keep_rows)
    if stray.size:
        raise DataError(f"outcome present at a non-outcome stage in {stray.size} rows")
    absent = np.flatnonzero(~present & carries & keep_rows)
    if absent.size:
        raise DataError(f"outcome missing at an outcome stage in {absent.size} rows")
    outcome = apply_transform(outcome, config.outcome_transform)

    shared_names = list(shared)
    only_names = list(only)
    shared_mat = _stack(shared, keep_rows)
    only_mat = _stack(only, keep_rows)
    pruned: list[str] = []
    if prune:
        keep_shared, keep_only = prune_collinear(shared_mat, only_mat)
        pruned = [c for k, c in enumerate(shared_names) if k not in keep_shared]
        pruned += [c for k, c in enumerate(only_names) if k not in keep_only]
        shared_mat, only_mat = shared_mat[:, keep_shared], only_mat[:, keep_only]
        shared_names = [shared_names[k] for k in keep_shared]
        only_names = [only_names[k] for k in keep_only]
        if pruned:
            logger.info("columns_pruned count=%d names=%s", len(pruned), ",".join(pruned))
    if not only_names:
        raise ConfigError("no excluded selection column survives collinearity pruning")

    n = int(keep_rows.sum())
    x_names = ([INTERCEPT] if config.intercept else []) + shared_names
    x_blocks = ([np.ones((n, 1))] if config.intercept else []) + [shared_mat]
    x = np.hstack(x_blocks)
    z = np.hstack([shared_mat, only_mat])
    z_names = shared_names + only_names
    exclusion = tuple(range(len(shared_names), len(z_names)))

    cluster = None
    if config.cluster_column:
        cluster, _ = pd.factorize(frame[config.cluster_column].astype(str), sort=True)
        cluster = cluster[keep_rows]
    weight = None
    if config.weight_column:
        weight = _numeric(frame, config.weight_column)[keep_rows]
        if np.isnan(weight).any():
            raise DataError(f"column {config.weight_column!r} has missing values")

    spec = ModelSpec(n_stages=n_stages, outcome_stages=spec_stages, exclusion_columns=exclusion)
    dataset = Dataset.create(
        spec,
        stage=stage[keep_rows],
        outcome=np.where(carries, outcome, np.nan)[keep_rows],
        x_outcome=x,
        z_selection=z,
        cluster_id=cluster,
        weight=weight,
        x_names=x_names,
        z_names=z_names,
    )
    logger.info(
        "design_built rows=%d x_columns=%d z_columns=%d excluded=%d",
        n,
        len(x_names),
        len(z_names),
        len(exclusion),
    )
    return BuiltDesign(
        dataset=dataset,
        spec=spec,
        registry=registry,
        references=references,
        dropped_rows=dropped,
        pruned=tuple(pruned),
        roles=roles,
    )


def read_table(path: str | Path) -> pd.DataFrame:
    try:
        return pd.read_csv(path, encoding="utf-8")
    except FileNotFoundError as exc:
        raise DataError(f"data file not found: {path}") from exc
    except (pd.errors.ParserError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot parse {path}: {exc}") from exc


def load_csv(path: str | Path, config: ColumnConfig, prune: bool = True) -> BuiltDesign:
    """Read a UTF-8 CSV with a header row and build its design."""
    return build_design(read_table(path), config, prune=prune)


def build_iv_input(
    frame: pd.DataFrame, config: IvTestConfig, seed: int | None = None
) -> IvTestInput:
    """Binary selection, binarized instrument and the selected outcomes.

    Raises:
        DataError: naming any required column missing from the data
    """
    _require_columns(frame, [config.outcome_column, config.stage_column, config.instrument_column])
    frame = frame.loc[frame[config.stage_column].notna()].reset_index(drop=True)
    stage = _stage_codes(frame[config.stage_column], config.stage_levels)
    selected = np.isin(stage, config.selected_stages)
    outcome = apply_transform(_numeric(frame, config.outcome_column), config.outcome_transform)
    instrument = _numeric(frame, config.instrument_column)
    if np.isnan(instrument).any():
        raise DataError(f"column {config.instrument_column!r} has missing values")
    return IvTestInput(
        y=np.where(selected, outcome, np.nan),
        s=selected.astype(int),
        z=binarize(instrument, config.rule),
        bins=config.bins,
        draws=config.draws,
        seed=seed,
    )
