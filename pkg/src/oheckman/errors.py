"""Exception hierarchy; each class maps to a CLI exit code."""

from collections.abc import Sequence

import numpy as np


class OHeckmanError(Exception):
    """Base class for all oheckman errors."""

    exit_code = 1


class ConfigError(OHeckmanError, ValueError):
    """Invalid configuration, model specification or arguments."""

    exit_code = 2


class DataError(OHeckmanError, ValueError):
    """Data violates the schema or the model's observability rule."""

    exit_code = 3


class RankDeficiencyError(DataError):
    """Design matrix does not have full column rank."""

    def __init__(self, message: str, columns: Sequence[str] = ()):
        super().__init__(f"{message}: {', '.join(columns)}" if columns else message)
        self.columns = tuple(columns)


class NumericalError(OHeckmanError, ArithmeticError):
    """A numerical routine could not produce a valid result."""

    exit_code = 4


class DomainError(NumericalError, ValueError):
    """Argument outside the domain of a function."""


class SingularMatrixError(NumericalError):
    """Matrix that must be inverted is singular or not positive definite."""

    def __init__(self, message: str, eigenvalues: np.ndarray | None = None):
        if eigenvalues is not None and eigenvalues.size:
            message = (
                f"{message} (min eigenvalue {eigenvalues.min():.3e}, "
                f"max eigenvalue {eigenvalues.max():.3e})"
            )
        super().__init__(message)
        self.eigenvalues = eigenvalues
