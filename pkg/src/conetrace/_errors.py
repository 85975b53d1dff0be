"""Exception hierarchy.

``ConeTraceError`` subclasses signal a mathematical failure (CLI exit 1);
``ConfigError`` signals a malformed run configuration (CLI exit 2).
"""


class ConeTraceError(Exception):
    """Base class for mathematical failures."""


class SingularMetricError(ConeTraceError):
    pass


class UnsupportedSymbolError(ConeTraceError):
    pass


class UnsupportedOperatorError(ConeTraceError):
    pass


class IncompleteStripError(ConeTraceError):
    pass


class PoleError(ConeTraceError):
    def __init__(self, message, root=None):
        super().__init__(message)
        self.root = root


class ContourTruncationError(ConeTraceError):
    pass


class ConvergenceError(ConeTraceError):
    pass


class GridTooCoarseError(ConeTraceError):
    pass


class TailBoundError(ConeTraceError):
    pass


class ContourError(ConeTraceError):
    pass


class ConditioningError(ConeTraceError):
    pass


class ConfigError(Exception):
    """Invalid or incomplete run configuration."""


class TruncationWarning(UserWarning):
    """A truncation (series order, quadrature window) dropped nonzero data."""
