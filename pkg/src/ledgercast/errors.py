"""Exception hierarchy.

Every error carries the CLI exit code it maps to, so the command line layer
can translate failures without a lookup table.
"""


class LedgercastError(Exception):
    exit_code = 1


class ValidationError(LedgercastError, ValueError):
    """Invalid arguments, parameters or configuration."""

    exit_code = 2


class ConfigError(ValidationError):
    pass


class StateError(ValidationError):
    """An object was used before it was ready (e.g. an unfitted model)."""


class DataError(LedgercastError):
    """Input data is unusable: too short, misaligned, malformed."""

    exit_code = 3


class RangeError(DataError):
    """A date or week falls outside the configured calendar or data span."""


class MissingDataError(DataError):
    pass


class IngestionError(DataError):
    def __init__(self, message, problems=()):
        self.problems = list(problems)
        if self.problems:
            shown = "; ".join(self.problems[:20])
            more = len(self.problems) - 20
            if more > 0:
                shown += f"; ... {more} more"
            message = f"{message}: {shown}"
        super().__init__(message)


class NumericalError(LedgercastError):
    exit_code = 4
