"""Exception types shared across the library."""


class MiniMtlError(Exception):
    """Base class for all library errors."""


class ShapeError(MiniMtlError):
    """Operands have incompatible shapes for the requested operation."""


class ConfigError(MiniMtlError):
    """A configuration value is out of its legal range or inconsistent."""


class StateError(MiniMtlError):
    """An operation was attempted in an invalid state (e.g. missing grads)."""


class OracleError(MiniMtlError):
    """A verification oracle detected an unusable input (e.g. nondeterminism)."""


class VocabError(MiniMtlError):
    """A token id falls outside the vocabulary."""


class InputError(MiniMtlError):
    """An input sequence or feature list is empty or malformed."""


class ParseError(MiniMtlError):
    """A data file line could not be parsed."""


class SchemaError(MiniMtlError):
    """A label does not belong to the active label schema."""


class DivergedError(MiniMtlError):
    """Training produced a non-finite loss."""

    def __init__(self, message: str, epoch: int, batch: int):
        super().__init__(message)
        self.epoch = epoch
        self.batch = batch
