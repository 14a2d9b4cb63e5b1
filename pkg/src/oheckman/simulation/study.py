"""Replication studies over (rho, alpha1) grids."""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from joblib import Parallel, delayed

from ..config import get_settings
from ..errors import ConfigError, OHeckmanError
from ..estimators import fit_imputation, fit_ols, fit_ordered_heckman
from ..inference import confidence_interval
from ..model.types import Dataset
from ..rng import derived_generator
from .dgp import (
    GROUP_COLUMN,
    STUDY_I_PROPORTIONS,
    STUDY_II_PROPORTIONS,
    DgpConfig,
    dgp_spec,
    simulate_dgp,
)

logger = logging.getLogger(__name__)

TRUE_BETA1 = 0.1
DEFAULT_TAUS = (0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
OLS = "ols"
OHECKMAN = "oheckman"


class Study(str, Enum):
    """Study I compares OLS with FIML; study II adds low-value imputation."""

    I = "I"  # noqa: E741
    II = "II"


STUDY_GRIDS: dict[Study, tuple[tuple[float, float], ...]] = {
    Study.I: tuple((r, a) for r in (0.5, 0.25, 0.1, 0.0) for a in (0.5, 0.2, 0.1, 0.0)),
    Study.II: tuple((r, a) for r in (1.0, 0.5, 0.25, 0.0) for a in (0.5, 0.2, 0.1, 0.0)),
}

STUDY_PROPORTIONS = {Study.I: STUDY_I_PROPORTIONS, Study.II: STUDY_II_PROPORTIONS}


def imputation_key(tau: float) -> str:
    return f"imputation_q{int(round(tau * 100))}"


@dataclass
class EstimateSummary:
    """Across-replication summary of one estimator's group coefficient.

    ``sd`` is the standard deviation across replications. ``coverage`` is
    NaN for estimators without a confidence interval.
    """

    estimator: str
    mean: float
    sd: float
    coverage: float = float("nan")
    n_success: int = 0
    n_failed: int = 0
    mean_crossing: float = float("nan")


@dataclass
class CellSummary:
    rho: float
    alpha1: float
    replications: int
    estimates: dict[str, EstimateSummary] = field(default_factory=dict)
    diff_mean: float = float("nan")
    diff_sd: float = float("nan")
    flagged: bool = False


@dataclass
class McStudyResult:
    study: Study
    replications: int
    seed: int
    estimators: list[str]
    cells: list[CellSummary] = field(default_factory=list)

    def cell(self, rho: float, alpha1: float) -> CellSummary:
        for cell in self.cells:
            if math.isclose(cell.rho, rho) and math.isclose(cell.alpha1, alpha1):
                return cell
        raise KeyError(f"no cell rho={rho} alpha1={alpha1}")

    @property
    def flagged(self) -> bool:
        return any(cell.flagged for cell in self.cells)


# (estimate, lower, upper, crossing); None marks a failed fit
_Draw = tuple[float, float, float, float] | None


def _ols_draw(data: Dataset) -> _Draw:
    rows = data.observed
    fit = fit_ols(data.outcome[rows], data.x_outcome[rows], data.weight[rows])
    lower, upper = confidence_interval(fit)[GROUP_COLUMN]
    return float(fit.params[GROUP_COLUMN]), float(lower), float(upper), float("nan")


def _fiml_draw(data: Dataset) -> _Draw:
    fit = fit_ordered_heckman(data, dgp_spec())
    if not fit.converged or fit.layout is None:
        return None
    k = fit.layout.beta(0).start + GROUP_COLUMN
    interval = confidence_interval(fit)[k]
    if not np.all(np.isfinite(interval)):
        return None
    return float(fit.params[k]), float(interval[0]), float(interval[1]), float("nan")


def _imputation_draw(data: Dataset, tau: float) -> _Draw:
    fit = fit_imputation(data, dgp_spec(), tau)
    nan = float("nan")
    return float(fit.coefficients[GROUP_COLUMN]), nan, nan, float(fit.n_crossing)


def replicate(
    study: Study,
    rho: float,
    alpha1: float,
    cell: int,
    rep: int,
    seed: int,
    estimators: Sequence[str],
    taus: Sequence[float],
) -> dict[str, _Draw]:
    """Simulate one sample and fit every requested estimator on it."""
    config = DgpConfig(rho=rho, alpha1=alpha1, stage_proportions=STUDY_PROPORTIONS[study])
    data = simulate_dgp(config, derived_generator(seed, cell, rep))
    by_tau = {imputation_key(t): t for t in taus}
    out: dict[str, _Draw] = {}
    for name in estimators:
        try:
            if name == OLS:
                out[name] = _ols_draw(data)
            elif name == OHECKMAN:
                out[name] = _fiml_draw(data)
            else:
                out[name] = _imputation_draw(data, by_tau[name])
        except OHeckmanError as exc:
            out[name] = None
            logger.warning(
                "replication_failed rho=%s alpha1=%s rep=%d estimator=%s reason=%s",
                rho,
                alpha1,
                rep,
                name,
                exc,
            )
    return out


def _sd(values: np.ndarray) -> float:
    return float(np.std(values, ddof=1)) if values.size > 1 else float("nan")


def _summarize(name: str, draws: list[_Draw]) -> EstimateSummary:
    ok = np.array([d for d in draws if d is not None], dtype=float).reshape(-1, 4)
    estimates = ok[:, 0]
    summary = EstimateSummary(
        estimator=name,
        mean=float(estimates.mean()) if estimates.size else float("nan"),
        sd=_sd(estimates),
        n_success=int(ok.shape[0]),
        n_failed=len(draws) - int(ok.shape[0]),
    )
    has_ci = np.isfinite(ok[:, 1]) & np.isfinite(ok[:, 2])
    if has_ci.any():
        inside = (ok[has_ci, 1] <= TRUE_BETA1) & (TRUE_BETA1 <= ok[has_ci, 2])
        summary.coverage = float(inside.mean())
    crossing = ok[:, 3]
    if np.isfinite(crossing).any():
        summary.mean_crossing = float(np.nanmean(crossing))
    return summary


def study_estimators(study: Study, taus: Sequence[float] = DEFAULT_TAUS) -> list[str]:
    if study is Study.I:
        return [OLS, OHECKMAN]
    return [OLS] + [imputation_key(t) for t in taus] + [OHECKMAN]


def run_study(
    study: Study | str,
    grid: Sequence[tuple[float, float]] | None = None,
    replications: int | None = None,
    seed: int | None = None,
    threads: int | None = None,
    estimators: Sequence[str] | None = None,
    taus: Sequence[float] = DEFAULT_TAUS,
) -> McStudyResult:
    """Run every (rho, alpha1) cell of ``grid`` for ``replications`` draws.

    Replication r of cell c uses the stream derived from (seed, c, r), so the
    result does not depend on ``threads``. FIML is skipped where |rho| = 1.
    Failed fits are excluded from the summaries and counted; a cell is
    flagged when any estimator fails more often than the configured share.
    """
    settings = get_settings()
    study = Study(study)
    grid = tuple(grid) if grid is not None else STUDY_GRIDS[study]
    replications = replications or settings.replications
    seed = settings.seed if seed is None else seed
    threads = threads or settings.threads
    names = list(estimators) if estimators is not None else study_estimators(study, taus)
    known = set(study_estimators(study, taus)) | {OLS, OHECKMAN}
    unknown = [n for n in names if n not in known]
    if unknown:
        raise ConfigError(f"estimators {unknown} are not part of study {study.value}")

    jobs = []
    for c, (rho, alpha1) in enumerate(grid):
        active = [n for n in names if not (n == OHECKMAN and abs(rho) >= 1.0)]
        for r in range(replications):
            jobs.append(delayed(replicate)(study, rho, alpha1, c, r, seed, active, taus))
    logger.info(
        "study_started study=%s cells=%d replications=%d threads=%d",
        study.value,
        len(grid),
        replications,
        threads,
    )
    draws = Parallel(n_jobs=threads)(jobs)

    result = McStudyResult(study=study, replications=replications, seed=seed, estimators=names)
    for c, (rho, alpha1) in enumerate(grid):
        cell_draws = draws[c * replications : (c + 1) * replications]
        cell = CellSummary(rho=rho, alpha1=alpha1, replications=replications)
        for name in names:
            if name not in cell_draws[0]:
                continue
            column = [d[name] for d in cell_draws]
            summary = _summarize(name, column)
            cell.estimates[name] = summary
            if summary.n_failed > settings.failure_share_flag * replications:
                cell.flagged = True
        if OLS in cell.estimates and OHECKMAN in cell.estimates:
            diffs = np.array(
                [
                    d[OLS][0] - d[OHECKMAN][0]  # type: ignore[index]
                    for d in cell_draws
                    if d[OLS] is not None and d[OHECKMAN] is not None
                ]
            )
            if diffs.size:
                cell.diff_mean = float(diffs.mean())
                cell.diff_sd = _sd(diffs)
        if cell.flagged:
            logger.warning("cell_flagged rho=%s alpha1=%s", rho, alpha1)
        result.cells.append(cell)
    return result
