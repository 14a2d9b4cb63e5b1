"""Standard normal distribution helpers."""

import numpy as np
from numpy.typing import ArrayLike
from scipy import special

from ..errors import DomainError

LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


def gaussian_cdf(x: ArrayLike) -> np.ndarray:
    """Standard normal distribution function."""
    return np.asarray(special.ndtr(np.asarray(x, dtype=float)))


def gaussian_pdf(x: ArrayLike) -> np.ndarray:
    """Standard normal density; zero at +/-inf."""
    x = np.asarray(x, dtype=float)
    return np.asarray(np.exp(-0.5 * x * x - LOG_SQRT_2PI))


def gaussian_logpdf(x: ArrayLike) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.asarray(-0.5 * x * x - LOG_SQRT_2PI)


def gaussian_quantile(p: ArrayLike) -> np.ndarray:
    """Inverse of gaussian_cdf.

    Raises:
        DomainError: if any probability lies outside the open interval (0, 1)
    """
    p = np.asarray(p, dtype=float)
    if np.any(~np.isfinite(p)) or np.any(p <= 0.0) or np.any(p >= 1.0):
        raise DomainError("gaussian_quantile requires probabilities strictly inside (0, 1)")
    return np.asarray(special.ndtri(p))


def log_prob_between(lower: ArrayLike, upper: ArrayLike) -> np.ndarray:
    """Elementwise log(Phi(upper) - Phi(lower)) without cancellation.

    When both limits sit in the upper tail the difference is taken between
    survival functions, Phi(-lower) - Phi(-upper), so neither term rounds to 1.
    Infinite limits are allowed; an empty interval yields -inf.
    """
    a, b = np.broadcast_arrays(np.asarray(lower, dtype=float), np.asarray(upper, dtype=float))
    upper_tail = a > 0.0
    hi = np.where(upper_tail, -a, b)
    lo = np.where(upper_tail, -b, a)
    log_hi = special.log_ndtr(hi)
    log_lo = special.log_ndtr(lo)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        ratio = np.exp(log_lo - log_hi)
        out = log_hi + np.log1p(-ratio)
    return np.asarray(out)
