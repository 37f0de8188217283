"""Exception hierarchy shared by all modules."""


class HilbertOUError(Exception):
    """Base class for every error raised by the package."""


class InvalidSpectrumError(HilbertOUError, ValueError):
    pass


class OrderingError(InvalidSpectrumError):
    pass


class DomainError(HilbertOUError, ValueError):
    pass


class ShapeError(HilbertOUError, ValueError):
    pass


class EmptyBatchError(HilbertOUError, ValueError):
    pass


class ConfigError(HilbertOUError, ValueError):
    """Invalid configuration. ``line`` is the 1-based source line when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DegenerateError(HilbertOUError, ValueError):
    pass


class AccuracyError(HilbertOUError, RuntimeError):
    """A Monte Carlo estimator missed its standard-error contract."""


class SingularModeError(HilbertOUError, FloatingPointError):
    def __init__(self, mode, message=None):
        self.mode = mode
        super().__init__(message or f"mode {mode}: S_eps underflows, T/S is singular")


class DivergentIntegralError(HilbertOUError, ArithmeticError):
    def __init__(self, message, index=None, eigenvalue=None):
        self.index = index
        self.eigenvalue = eigenvalue
        super().__init__(message)


class IntegrabilityError(HilbertOUError, ArithmeticError):
    def __init__(self, norm_name, message=None):
        self.norm_name = norm_name
        super().__init__(message or f"{norm_name} is not finite for this field/exponent")


class TestClassError(HilbertOUError, ValueError):
    """A function used as a test function is not in D_T (u(T, .) != 0)."""

    __test__ = False  # keep pytest from collecting it


class StiffnessError(HilbertOUError, RuntimeError):
    pass


class ConventionError(HilbertOUError, RuntimeError):
    pass
