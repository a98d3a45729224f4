"""Exception types shared across the engine."""


class SymtrailError(Exception):
    """Base class for all engine errors."""


class IndexOutOfRange(SymtrailError):
    """A byte variable refers to a position past the end of the input."""

    def __init__(self, index: int, length: int):
        super().__init__(f"byte variable k!{index} out of range for input of length {length}")
        self.index = index
        self.length = length


class ExprError(SymtrailError):
    """An expression violates a structural invariant (widths, operand kinds)."""


class ParseError(SymtrailError):
    """Constraint text could not be parsed back into an expression."""


class ConsistencyError(SymtrailError):
    """A trace operation disagrees with the concrete execution (caller bug)."""


class UnbalancedExit(SymtrailError):
    """A function exit was recorded with no matching enter."""


class SiteConflict(SymtrailError):
    """The same branch location was recorded with conflicting metadata."""


class UnknownSite(SymtrailError):
    """A branch location was queried before it was ever recorded."""


class SchemaError(SymtrailError):
    """A coverage-tree document has unknown or missing fields."""


class UnsatError(SymtrailError):
    """No byte assignment satisfies the constraint."""


class TooManyVarsError(SymtrailError):
    """The constraint involves more positions than the exhaustive search cap."""

    def __init__(self, count: int, cap: int):
        super().__init__(f"constraint touches {count} positions, cap is {cap}")
        self.count = count
        self.cap = cap


class UnsatDrop(SymtrailError):
    """A candidate was discarded because its constraint is unsatisfiable."""


class UnparseableResponse(SymtrailError):
    """No test-input block could be extracted from a model response."""


class TransportError(SymtrailError):
    """The chat-completion endpoint failed after all retries."""

    def __init__(self, message: str, code: int = 0):
        super().__init__(message)
        self.code = code


class TransportTimeout(TransportError):
    """The chat-completion request timed out."""


class ConfigError(SymtrailError):
    """The campaign configuration is invalid."""
