"""Exception types shared across the package."""


class StgateError(Exception):
    """Base class for all package errors."""


class ShapeError(StgateError, ValueError):
    """Operands have incompatible shapes."""


class ContractError(StgateError, ValueError):
    """A documented precondition was violated."""


class DataError(StgateError, ValueError):
    """Input data is malformed or insufficient."""


class ParseError(DataError):
    """A file could not be parsed; message carries the line number."""


class UndefinedMetricError(StgateError, ValueError):
    """A metric is undefined for the given inputs (e.g. single-class labels)."""


class OptimizerError(StgateError, RuntimeError):
    """An optimizer step could not be applied (e.g. non-finite gradient)."""


class TrainingDivergedError(StgateError, RuntimeError):
    """Training produced a non-finite loss; message names the epoch."""
