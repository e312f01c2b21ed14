"""Exception hierarchy shared across the package."""


class NSDDEError(Exception):
    """Base class for all errors raised by nsdde."""


class GeneratorError(NSDDEError, ValueError):
    pass


class NonSquare(GeneratorError):
    pass


class NegativeOffDiagonal(GeneratorError):
    pass


class RowSumNonzero(GeneratorError):
    pass


class HorizonExceeded(NSDDEError, ValueError):
    pass


class ModelError(NSDDEError, ValueError):
    """A model violates a structural requirement (e.g. the zero solution)."""


class NonFiniteEvaluation(NSDDEError, ArithmeticError):
    pass


class SchemeError(NSDDEError, ValueError):
    """Invalid scheme configuration, including the well-posedness gate."""


class NoConvergence(NSDDEError, RuntimeError):
    def __init__(self, max_iter, residual=float("nan")):
        super().__init__(
            f"implicit solve did not converge in {max_iter} iterations "
            f"(residual {residual:.3e}); reduce the step size"
        )
        self.max_iter = max_iter
        self.residual = residual


class BlowUp(NSDDEError, FloatingPointError):
    def __init__(self, step, value=float("inf")):
        super().__init__(f"state exceeded the overflow guard at step {step}")
        self.step = step
        self.value = value


class AllPathsBlewUp(NSDDEError, RuntimeError):
    pass


class NonPositiveMoment(NSDDEError, ValueError):
    pass


class MissingConstants(NSDDEError, ValueError):
    pass


class DivisionByZeroV(NSDDEError, ZeroDivisionError):
    pass


class BracketInvalid(NSDDEError, ValueError):
    pass


class ConfigError(NSDDEError, ValueError):
    pass
