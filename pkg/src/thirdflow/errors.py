"""Exception types shared across the package."""


class ThirdFlowError(Exception):
    pass


class ParameterError(ThirdFlowError, ValueError):
    """A constructor or operation received parameters outside their admissible range."""


class CapabilityError(ThirdFlowError, TypeError):
    """The requested operator descriptor has no closed-form resolvent."""


class PreconditionError(ThirdFlowError, ValueError):
    pass


class ValidationError(ThirdFlowError, ValueError):
    pass


class DomainError(ThirdFlowError, ValueError):
    pass


class NonFiniteError(ThirdFlowError, FloatingPointError):
    pass


class StiffnessError(ThirdFlowError, RuntimeError):
    """Adaptive step size fell below the configured minimum."""


class InfeasibleError(ThirdFlowError, ValueError):
    def __init__(self, interval, message=None):
        self.interval = interval
        super().__init__(message or f"empty feasible interval for {interval}")


class GenerationError(ThirdFlowError, RuntimeError):
    pass
