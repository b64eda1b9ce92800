"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: ConfigError -> 2, DegeneracyError -> 3,
InputError / OSError -> 4.
"""


class EpilagError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(EpilagError):
    """Invalid or infeasible configuration."""


class ParameterError(ConfigError):
    """Model parameters outside their valid domain (non-positive rates etc.)."""


class InputError(EpilagError):
    """Malformed or mismatched input data (files, series, arguments)."""


class IngestionError(InputError):
    """Duplicate or invalid measurement pushed into a buffer."""


class UndefinedRateError(InputError):
    """A metric rate (TPR/FPR) has an empty denominator."""


class DegeneracyError(EpilagError):
    """All importance weights collapsed to zero; carries run diagnostics."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
