"""Exception hierarchy shared by all modules."""


class CrossoverError(Exception):
    """Base class. ``kind`` is the machine-readable category."""

    kind = "error"

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})

    def to_dict(self):
        return {"error": self.kind, "message": str(self), "diagnostics": self.diagnostics}


class UsageError(CrossoverError):
    kind = "usage"


class DomainError(CrossoverError, ValueError):
    kind = "domain"


class NumericalError(CrossoverError, ArithmeticError):
    kind = "numerical"


class TruncationError(NumericalError):
    kind = "truncation"


class PreconditionError(DomainError):
    kind = "precondition"


class ContractError(CrossoverError):
    kind = "contract"


class DivergenceError(NumericalError):
    kind = "divergence"
