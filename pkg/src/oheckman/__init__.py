"""oheckman - ordered sample-selection estimation, instrument tests and Monte Carlo studies."""

from .config import EstimatorType, Settings, configure, get_settings
from .errors import ConfigError, DataError, NumericalError, OHeckmanError

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DataError",
    "EstimatorType",
    "NumericalError",
    "OHeckmanError",
    "Settings",
    "configure",
    "get_settings",
    "__version__",
]
