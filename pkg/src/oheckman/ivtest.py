"""Moment-inequality test of an exclusion restriction with binary selection.

Under a valid, monotone instrument the selected observations with z = 0
are a subset of those with z = 1 (the always-selected). Their outcome mean
must then lie between the means of the lowest and the highest q-fraction of
the selected z = 1 outcomes, q = P(s=1|z=0) / P(s=1|z=1), and their outcome
distribution is bounded bin by bin. Violations are studentized with
bootstrap standard errors; p-values come from the recentered bootstrap
distribution of the maximum studentized violation.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from .config import get_settings
from .errors import DataError, NumericalError
from .rng import derived_generator

logger = logging.getLogger(__name__)

MEDIAN_SPLIT = "median_split"

_CHUNK = 250


def binarize(values: np.ndarray, rule: str | float = MEDIAN_SPLIT) -> np.ndarray:
    """0/1 indicator of ``values`` above the sample median or a threshold.

    A median split that would leave nothing above the median (heavy ties at
    the top) uses ``>=`` instead.

    Raises:
        DataError: if the input is empty, constant or yields no variation
    """
    v = np.asarray(values, dtype=float).reshape(-1)
    if v.size == 0:
        raise DataError("cannot binarize an empty vector")
    if np.all(v == v[0]):
        raise DataError("cannot binarize a constant vector")
    if rule == MEDIAN_SPLIT:
        median = float(np.median(v))
        out = v > median
        if not out.any():
            out = v >= median
    elif isinstance(rule, (int, float)):
        out = v > float(rule)
    else:
        raise DataError(f"unknown binarization rule {rule!r}")
    if out.all() or not out.any():
        raise DataError("binarized vector has no variation")
    return out.astype(int)


@dataclass(frozen=True)
class IvTestInput:
    """Outcome (NaN unless selected), binary selection and binary instrument."""

    y: np.ndarray
    s: np.ndarray
    z: np.ndarray
    bins: int | None = None
    draws: int | None = None
    seed: int | None = None

    def __post_init__(self) -> None:
        y = np.asarray(self.y, dtype=float).reshape(-1)
        s = np.asarray(self.s).reshape(-1)
        z = np.asarray(self.z).reshape(-1)
        if not (y.size == s.size == z.size):
            raise DataError("y, s and z must have equal length")
        for name, arr in (("s", s), ("z", z)):
            if not np.all(np.isin(arr, (0, 1))):
                raise DataError(f"{name} must be binary (0/1)")
        selected = s == 1
        if np.any(np.isnan(y[selected])):
            raise DataError("outcome missing for a selected observation")
        if np.any(~np.isnan(y[~selected])):
            raise DataError("outcome present for an unselected observation")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "s", s.astype(int))
        object.__setattr__(self, "z", z.astype(int))


@dataclass
class IvTestResult:
    """Maximum studentized mean-constraint violation and bootstrap p-values.

    A negative ``standardized_difference`` means no mean constraint is
    violated in the sample. ``direction`` is -1 when the instrument labels
    were swapped to make P(s=1|z=1) >= P(s=1|z=0).
    """

    standardized_difference: float
    p_mean: float
    p_prob: float
    direction: int
    p1: float
    p0: float
    q: float
    n: int
    draws: int
    mean_constraints: np.ndarray = field(default_factory=lambda: np.empty(0))
    prob_constraints: np.ndarray = field(default_factory=lambda: np.empty(0))


def _trimmed_mean(sorted_y: np.ndarray, share: float, upper: bool) -> float:
    """Mean of the lowest (or highest) ``share`` of the distribution, with the
    observation at the boundary entering with its fractional weight."""
    values = sorted_y[::-1] if upper else sorted_y
    n = values.size
    mass = share * n
    whole = int(np.floor(mass))
    frac = mass - whole
    if mass <= 0.0:
        return float(values[0])
    total = float(values[:whole].sum())
    if whole < n:
        total += frac * float(values[whole])
    return total / mass


def _constraints(
    y: np.ndarray, s: np.ndarray, z: np.ndarray, bin_of: np.ndarray, n_bins: int
) -> tuple[np.ndarray, np.ndarray]:
    """Mean and probability constraint values; positive entries are violations."""
    treated = z == 1
    control = ~treated
    n1, n0 = int(treated.sum()), int(control.sum())
    if n1 == 0 or n0 == 0:
        raise NumericalError("an instrument arm is empty")
    sel1 = treated & (s == 1)
    sel0 = control & (s == 1)
    if not sel1.any() or not sel0.any():
        raise NumericalError("a selected instrument cell is empty")
    p1 = sel1.sum() / n1
    p0 = sel0.sum() / n0
    q = min(p0 / p1, 1.0)

    sorted_y = np.sort(y[sel1])
    lower = _trimmed_mean(sorted_y, q, upper=False)
    upper = _trimmed_mean(sorted_y, q, upper=True)
    mean0 = float(y[sel0].mean())
    means = np.array([lower - mean0, mean0 - upper])

    mass1 = np.bincount(bin_of[sel1], minlength=n_bins) / n1
    mass0 = np.bincount(bin_of[sel0], minlength=n_bins) / n0
    probs = np.concatenate([mass1 - (p1 - p0) - mass0, mass0 - mass1])
    return means, probs


def _bootstrap_chunk(
    y: np.ndarray,
    s: np.ndarray,
    z: np.ndarray,
    bin_of: np.ndarray,
    n_bins: int,
    seed: int,
    draws: range,
) -> np.ndarray:
    n = y.size
    out = np.full((len(draws), 2 + 2 * n_bins), np.nan)
    for row, b in enumerate(draws):
        idx = derived_generator(seed, b).integers(0, n, size=n)
        try:
            means, probs = _constraints(y[idx], s[idx], z[idx], bin_of[idx], n_bins)
        except NumericalError:
            continue
        out[row] = np.concatenate([means, probs])
    return out


def _max_studentized(values: np.ndarray, se: np.ndarray) -> float:
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = np.where(se > 0, values / se, np.nan)
    return float(np.nanmax(scaled)) if np.any(np.isfinite(scaled)) else float("nan")


def _p_value(point: np.ndarray, boot: np.ndarray, se: np.ndarray) -> tuple[float, float]:
    statistic = _max_studentized(point, se)
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = np.where(se > 0, (boot - point) / se, np.nan)
    finite = np.isfinite(scaled).any(axis=1)
    recentered = np.nanmax(scaled[finite], axis=1)
    if recentered.size == 0 or not np.isfinite(statistic):
        return statistic, float("nan")
    return statistic, float(np.mean(recentered >= statistic))


def huber_mellace(data: IvTestInput, threads: int | None = None) -> IvTestResult:
    """Bootstrap test of the mean and probability constraints.

    Bins are equal-mass bins of the pooled selected outcomes, fixed on the
    original sample. Bootstrap draw b resamples rows with its own stream
    derived from (seed, b).

    Raises:
        NumericalError: if a selected instrument cell is empty
    """
    settings = get_settings()
    n_bins = data.bins or settings.iv_bins
    draws = data.draws or settings.iv_draws
    seed = settings.seed if data.seed is None else data.seed
    threads = threads or settings.threads

    y, s, z = data.y, data.s, data.z
    p1 = float(s[z == 1].mean()) if (z == 1).any() else float("nan")
    p0 = float(s[z == 0].mean()) if (z == 0).any() else float("nan")
    direction = 1
    if p1 < p0:
        z = 1 - z
        p1, p0 = p0, p1
        direction = -1
    q = p0 / p1 if p1 > 0 else float("nan")
    if not q <= 1.0:
        raise NumericalError(f"selection ratio {q} is not in [0, 1] after orientation")

    selected_y = y[s == 1]
    edges = np.quantile(selected_y, np.arange(1, n_bins) / n_bins)
    bin_of = np.zeros(y.size, dtype=int)
    bin_of[s == 1] = np.searchsorted(edges, selected_y, side="right")

    means, probs = _constraints(y, s, z, bin_of, n_bins)
    chunks = [range(start, min(start + _CHUNK, draws)) for start in range(0, draws, _CHUNK)]
    parts = Parallel(n_jobs=threads)(
        delayed(_bootstrap_chunk)(y, s, z, bin_of, n_bins, seed, chunk) for chunk in chunks
    )
    boot = np.vstack(parts)
    failed = int(np.sum(~np.isfinite(boot).all(axis=1)))
    if failed:
        logger.warning("ivtest_bootstrap_failed draws=%d", failed)
    boot = boot[np.isfinite(boot).all(axis=1)]
    se = boot.std(axis=0, ddof=1) if boot.shape[0] > 1 else np.full(boot.shape[1], np.nan)

    standardized, p_mean = _p_value(means, boot[:, :2], se[:2])
    _, p_prob = _p_value(probs, boot[:, 2:], se[2:])
    logger.info(
        "ivtest_done n=%d q=%.4f standardized_difference=%.4f p_mean=%.4f p_prob=%.4f",
        y.size,
        q,
        standardized,
        p_mean,
        p_prob,
    )
    return IvTestResult(
        standardized_difference=standardized,
        p_mean=p_mean,
        p_prob=p_prob,
        direction=direction,
        p1=p1,
        p0=p0,
        q=q,
        n=int(y.size),
        draws=int(boot.shape[0]),
        mean_constraints=means,
        prob_constraints=probs,
    )
