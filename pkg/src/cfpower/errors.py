"""Exception types. Each carries the CLI exit code it maps to."""


class CfPowerError(Exception):
    exit_code = 1


class SchemaError(CfPowerError, ValueError):
    """Input file does not match its documented layout."""

    exit_code = 2


class DomainError(CfPowerError, ValueError):
    """An argument is outside its mathematical domain."""

    exit_code = 2


class DegenerateTargetError(DomainError):
    """Target series has zero variance and cannot be modelled."""


class NumericalError(CfPowerError, ArithmeticError):
    exit_code = 3


class FitError(NumericalError):
    def __init__(self, message: str, diagnostics=None):
        super().__init__(message)
        self.diagnostics = list(diagnostics or [])


class CoverageError(CfPowerError, LookupError):
    """Data does not cover a required window (months, zones, periods)."""

    exit_code = 4
