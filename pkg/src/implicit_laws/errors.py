"""Exception hierarchy shared by all modules."""


class ImplicitLawError(Exception):
    """Base class for every error raised by the package."""


class ParameterDomainError(ImplicitLawError, ValueError):
    pass


class DimensionError(ImplicitLawError, ValueError):
    pass


class RootNotBracketedError(ImplicitLawError):
    def __init__(self, value, message=None):
        self.value = value
        super().__init__(message or f"no sign change in bracket at d={value!r}")


class SelectionFailure(ImplicitLawError, RuntimeError):
    def __init__(self, message, residual=float("nan")):
        self.residual = residual
        super().__init__(f"{message} (last residual {residual:.3e})")


class PropertyViolation(ImplicitLawError, AssertionError):
    def __init__(self, message, witness=None):
        self.witness = witness
        super().__init__(message)


class StepFailure(ImplicitLawError, RuntimeError):
    def __init__(self, step, residual, message="nonlinear solve did not converge"):
        self.step = step
        self.residual = residual
        super().__init__(f"{message} at step {step} (residual {residual:.3e})")


class SolverError(ImplicitLawError, RuntimeError):
    pass


class CompatibilityError(ImplicitLawError, ValueError):
    pass


class ConfigError(ImplicitLawError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
