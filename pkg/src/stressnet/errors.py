"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operand shapes are incompatible with the requested operation."""


class DomainError(ValueError):
    """Input values lie outside the mathematical domain of an operation."""


class DataError(RuntimeError):
    """A dataset, cache, or checkpoint on disk is missing or malformed."""


class CheckpointError(DataError):
    """Checkpoint bytes are corrupt or do not match the declared layout."""


class StaleCacheError(RuntimeError):
    """A backward pass was requested without a matching live forward cache."""


class NumericError(ArithmeticError):
    """A non-finite value appeared where finite arithmetic is guaranteed."""
