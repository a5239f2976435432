"""Exception types shared across the package.

The CLI maps these onto exit codes: input problems exit 2, undefined
metrics exit 3, internal invariant violations exit 4.
"""


class FairForestError(Exception):
    """Base class for all package errors."""


class InputError(FairForestError):
    """Bad user input: missing file, dimension mismatch, malformed data."""


class ParseError(InputError):
    """Row- or node-addressed parse failure in a CSV or forest document."""


class ConfigError(InputError):
    """Invalid configuration value (bad fraction, unknown schema name, ...)."""


class ForestFormatError(ParseError):
    """Forest document violates the portable JSON schema."""


class UndefinedMetricError(FairForestError):
    """A metric denominator is empty (empty dataset or sensitive group)."""


class InternalError(FairForestError):
    """An internal invariant was violated; indicates a bug, not bad input."""
