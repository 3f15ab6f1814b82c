"""Exception hierarchy shared by all modules."""


class PQGLError(Exception):
    """Base class for every error raised by this package."""


class DomainError(PQGLError, ValueError):
    pass


class GapViolation(DomainError):
    """q/p exceeds 1 + 1/n - 1/r."""


class HypothesisNotMet(PQGLError):
    """Parameters are admissible but match none of the three regimes."""


class DegenerateExponent(PQGLError, ArithmeticError):
    pass


class DegenerateWeight(DomainError):
    pass


class CaseError(PQGLError):
    pass


class HorizonError(PQGLError):
    """A supremum was attained at the end of the search interval."""


class S0NotFound(PQGLError):
    pass


class ConstantBlowup(PQGLError, ArithmeticError):
    pass


class HypothesisError(PQGLError):
    pass


class DegenerateHessian(PQGLError, ArithmeticError):
    pass


class EllipticityViolation(PQGLError):
    def __init__(self, msg, witness=None):
        super().__init__(msg)
        self.witness = witness


class GrowthViolation(PQGLError):
    def __init__(self, msg, witness=None):
        super().__init__(msg)
        self.witness = witness


class MixedBoundViolation(PQGLError):
    def __init__(self, msg, witness=None):
        super().__init__(msg)
        self.witness = witness


class GlueError(PQGLError):
    pass


class QuadratureWarning(UserWarning):
    pass


class NumericOverflow(PQGLError, ArithmeticError):
    pass


class NonConvergence(PQGLError):
    """Raised when the iteration cap is hit; carries the partial result."""

    def __init__(self, msg, field=None, report=None):
        super().__init__(msg)
        self.field = field
        self.report = report


class SplitNotApplicable(PQGLError):
    pass


class ProductDivergence(PQGLError, ArithmeticError):
    pass


class StaleField(PQGLError):
    pass


class ConfigError(PQGLError, ValueError):
    pass
