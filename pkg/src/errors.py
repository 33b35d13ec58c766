"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Invalid input or violated precondition. The CLI maps this to exit code 2."""


class InvalidStateError(ValidationError):
    """A matrix or vector that should describe a quantum state does not."""


class ContractViolationError(ValidationError):
    """An operand violates the contract of an operation (e.g. a non-Hermitian input)."""


class DimensionMismatchError(ValidationError):
    """Tensor-factor dimensions do not match the operand."""


class InvalidWeightsError(ValidationError):
    """Mixture weights are not a point of the probability simplex."""


class NonFiniteRateError(ValidationError):
    """A rate callback returned NaN or infinity (or could not be integrated)."""


class GridError(ValidationError):
    """A time grid or time argument is malformed."""


class EmbeddingError(RuntimeError):
    """A constructed embedding failed its post-hoc residual checks."""
