"""Gold/bitcoin daily trading backtester: ARIMA forecasts feeding a
PSO-optimised, risk-aware three-day trading plan."""

__version__ = "0.1.0"

from .errors import CTPError, DataError, NumericalError, UsageError

__all__ = ["CTPError", "DataError", "NumericalError", "UsageError", "__version__"]
