"""Exception hierarchy shared by the library and the CLI."""


class PersistestError(Exception):
    """Base class for all errors raised by persistest."""


class DomainError(PersistestError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ContractError(PersistestError):
    """A structural precondition (ordering, monotonicity, shape) is violated."""


class InputError(PersistestError):
    """Malformed or unreadable input data."""


class StageError(PersistestError):
    """Wraps an error raised inside a named pipeline stage."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
