"""Exception hierarchy shared by every module in the package.

The command line interface maps these classes to process exit codes:
configuration problems exit with 2, data problems with 3, and numeric
failures with 4.  Library code raises the most specific class available
so that callers can react to the category without parsing messages.
"""


class TradenetError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(TradenetError):
    """A configuration value is missing, malformed, or out of range."""


class DimensionError(ConfigError):
    """A feature or parameter vector has the wrong dimension.

    The message names the offending vector so the mismatch can be fixed
    without a debugger.
    """


class DataError(TradenetError):
    """Input data is missing, malformed, or violates a schema."""


class ParseError(DataError):
    """A data file could not be parsed; the message carries file and line."""


class SchemaError(DataError):
    """A data file parsed but does not match the expected schema."""


class NumericError(TradenetError):
    """A numeric computation produced non-finite values or failed to converge."""


class RankDeficiencyError(NumericError):
    """A least-squares design matrix is rank deficient.

    Attributes:
        columns: names of the linearly dependent columns.
    """

    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = tuple(columns)
