"""Exception hierarchy shared across the package.

CLI exit codes map onto these: ConfigError -> 2, DataError -> 3,
NumericError -> 4. Plain ValueError/IndexError are reserved for
programming mistakes (bad layer id, dimension mismatch).
"""


class LinkNBError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(LinkNBError):
    """Invalid experiment configuration or bin scheme declaration."""


class SchemeError(ConfigError):
    """Bin scheme incompatible with the graph it is applied to."""


class DataError(LinkNBError):
    """Malformed or inconsistent input data."""


class ParseError(DataError):
    """Unparseable input row. Carries the offending line number."""

    def __init__(self, path, lineno, message):
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = path
        self.lineno = lineno


class SingleClassError(DataError):
    """A sample set contains only one label class where two are required."""


class NumericError(LinkNBError):
    """Numerical failure (non-finite features, optimizer breakdown)."""


class BinCapacityError(ConfigError):
    """Bin space exceeds the configured cap."""
