"""Error types shared by services and the command layer.

Services raise these (or plain ``ValueError`` for bad arguments); only the
command layer turns them into exit codes.
"""

from typing import Optional

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_PARSE = 2
EXIT_REGIME = 3


class FsoQkdError(Exception):
    exit_code: int = EXIT_FAILURE


class ScenarioParseError(FsoQkdError):
    exit_code = EXIT_PARSE

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.line = line
        self.column = column
        self.message = message
        where = ""
        if line is not None:
            where = f"line {line}, column {column or 1}: "
        super().__init__(f"{where}{message}")


class ScenarioValidationError(FsoQkdError):
    exit_code = EXIT_PARSE


class RegimeError(FsoQkdError):
    """Raised when a sweep point leaves the weak-turbulence regime."""

    exit_code = EXIT_REGIME

    def __init__(self, point_index: int, sweep_value: float, rytov_var: float, reason: str = ""):
        self.point_index = point_index
        self.sweep_value = sweep_value
        self.rytov_var = rytov_var
        detail = f" ({reason})" if reason else ""
        super().__init__(
            f"point {point_index} (sweep value {sweep_value:g}) is in strong turbulence: "
            f"rytov variance {rytov_var:.4g}{detail}"
        )


class DegenerateStatisticsError(FsoQkdError):
    """Too few post-selected signals (n * p < 1) for finite-size terms."""


class InvalidCovarianceError(FsoQkdError):
    """Covariance matrix fails the symplectic physicality check."""
