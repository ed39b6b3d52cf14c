"""
Exception hierarchy shared by the library and the CLI.

Each class carries the process exit status the CLI maps it to.
"""


class HybridBellError(Exception):
    """Base class for every error raised by hybrid_bell."""

    exit_code = 1


class ConfigurationError(HybridBellError, ValueError):
    """Invalid parameters, flags or configuration file entries."""

    exit_code = 2


class PhaseSpaceDomainError(HybridBellError, ValueError):
    """A POVM symbol was requested outside its domain."""

    exit_code = 2


class IntegrationError(HybridBellError, ArithmeticError):
    """Quadrature did not reach the requested tolerance."""

    exit_code = 4

    def __init__(self, message: str, estimate: float, error_bound: float):
        super().__init__(f"{message} (estimate={estimate!r}, error={error_bound!r})")
        self.estimate = estimate
        self.error_bound = error_bound


class OptimizationError(HybridBellError, ArithmeticError):
    """A supremum search ended without a usable result."""

    exit_code = 4

    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best


class PreconditionError(HybridBellError):
    """An operation was called on inputs that violate its precondition."""

    exit_code = 3


class NonlocalBehaviorError(PreconditionError):
    """The behavior violates the locality conditions; no non-negative JPDAO."""

    def __init__(self, violation: float):
        super().__init__(f"behavior is not local: V = {violation:.6g} > 0")
        self.violation = violation


class DegenerateKappaError(PreconditionError):
    """kappa is undefined because only one side of its ratio vanishes."""


class SettingsMismatchError(PreconditionError):
    """A test configuration refers to settings the behavior does not have."""


class InfeasibleConstraintError(PreconditionError):
    """No candidate satisfied the optimization constraint."""


class SingularQuasiprobabilityError(PreconditionError):
    """The requested s-parameterized quasiprobability is not a regular function."""


class DegenerateMarginalError(PreconditionError):
    """A ratio was requested whose denominator vanishes."""


class MarginalCheckError(HybridBellError):
    """A homogeneous component failed its zero line-marginal condition."""

    exit_code = 4

    def __init__(self, component: str, deviation: float):
        super().__init__(
            f"line marginal of {component} deviates from zero by {deviation:.3g}"
        )
        self.component = component
        self.deviation = deviation
