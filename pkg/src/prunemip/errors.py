"""Exception types shared across the package."""


class PruneMipError(Exception):
    """Base class for all package errors."""


class InvalidInputError(PruneMipError):
    """Bad argument values or dimension mismatches."""


class ValidationError(PruneMipError):
    """A stored artifact violates a structural invariant."""


class ParseError(PruneMipError):
    """A file could not be parsed; the message names the offending field."""


class SchemaError(PruneMipError):
    """A referenced column or variable does not exist."""


class NothingToPruneError(PruneMipError):
    """A pruning step was requested but no unmasked weights remain."""


class LayerCollapseError(PruneMipError):
    """A node-pruning step would remove every node of a hidden layer."""


class TrainingDivergedError(PruneMipError):
    """Loss became non-finite during training."""

    def __init__(self, message: str, last_finite_epoch: int):
        super().__init__(message)
        self.last_finite_epoch = last_finite_epoch


class NotAPurePruningError(PruneMipError):
    """Two networks differ by more than mask additions."""


class EncodingError(PruneMipError):
    """The network/bounds pair cannot be encoded as a MILP."""
