"""Exception types raised across the package."""


class CritQfiError(Exception):
    """Base class for all package errors."""


class ParameterError(CritQfiError, ValueError):
    """Invalid model parameters (odd L, non-positive beta, J = 0 where forbidden)."""


class DomainError(CritQfiError, ValueError):
    """Input outside the domain of a formula (non-density matrix, off-critical line)."""


class SizeError(CritQfiError, ValueError):
    """Dense Fock-space construction requested beyond the supported size."""


class SingularityError(CritQfiError, ArithmeticError):
    """A gapless momentum sits on the grid, so a zero-temperature sum diverges."""

    def __init__(self, message, k=None):
        super().__init__(message)
        self.k = k


class DegeneracyError(CritQfiError, ArithmeticError):
    """Ground state is degenerate; perturbative formulas do not apply."""


class BracketError(CritQfiError, ArithmeticError):
    """A maximizer landed on the edge of its search bracket."""

    def __init__(self, message, stage=None):
        super().__init__(message)
        self.stage = stage


class QuadratureError(CritQfiError, ArithmeticError):
    """Adaptive quadrature did not reach the requested accuracy."""


class ConsistencyError(CritQfiError, ArithmeticError):
    """Internal numerical consistency check failed."""


class ClassificationError(CritQfiError, ValueError):
    """Kernel cannot be classified (for example, identically zero)."""
