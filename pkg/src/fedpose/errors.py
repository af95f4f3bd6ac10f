"""Exception hierarchy shared across the package.

Every error raised by fedpose derives from FedposeError so the CLI can
map failure classes to distinct exit codes.
"""


class FedposeError(Exception):
    """Base class for all package errors."""


class ConfigError(FedposeError):
    """Invalid configuration value, file, or flag combination."""


class DataFormatError(FedposeError):
    """Malformed input data (parse failures carry the line number)."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DimensionError(FedposeError):
    """Array shape mismatch in a numerical primitive."""


class NumericalHealthError(FedposeError):
    """Non-finite value detected (loss, gradient, or parameter)."""


class AggregationError(FedposeError):
    """Client weight sets disagree on keys or shapes."""


class PartitionError(FedposeError):
    """A partition-plan invariant could not be satisfied."""


class EvaluationError(FedposeError):
    """Evaluation requested on an unusable dataset."""


class ContaminationError(FedposeError):
    """A supposedly held-out client overlaps the training clients."""
