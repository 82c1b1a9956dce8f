"""minimtl: desk-scale multi-task text classification with soft feature sharing."""

from .errors import (
    ConfigError,
    DivergedError,
    InputError,
    MiniMtlError,
    OracleError,
    ParseError,
    SchemaError,
    ShapeError,
    StateError,
    VocabError,
)
from .tensor import Rng, Tensor, backward, finite_difference_grad, op_forward, zero_grad

__version__ = "0.1.0"
