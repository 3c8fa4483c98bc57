"""Third-order dynamics with time-varying damping for monotone equations."""
from .errors import (CapabilityError, DomainError, GenerationError, InfeasibleError,
                     NonFiniteError, ParameterError, PreconditionError, StiffnessError,
                     ThirdFlowError, ValidationError)
from .integrator import SolverConfig, SystemState, Trajectory, integrate
from .operators import OperatorSpec, certify_property
from .problems import (ProblemInstance, make_affine_monotone, make_fbf_instance, make_problem,
                       make_quadratic, make_splitting_lasso, make_vi_box)
from .schedules import ConstantSchedule, ExpSchedule, PolySchedule, schedule_from_dict
from .validation import THEOREMS, ValidationReport, suggest_parameters, validate

__version__ = "0.1.0"

__all__ = [
    "CapabilityError", "DomainError", "GenerationError", "InfeasibleError", "NonFiniteError",
    "ParameterError", "PreconditionError", "StiffnessError", "ThirdFlowError", "ValidationError",
    "SolverConfig", "SystemState", "Trajectory", "integrate", "OperatorSpec", "certify_property",
    "ProblemInstance", "make_problem", "make_quadratic", "make_affine_monotone",
    "make_vi_box", "make_splitting_lasso", "make_fbf_instance",
    "ConstantSchedule", "ExpSchedule", "PolySchedule",
    "schedule_from_dict", "THEOREMS", "ValidationReport", "suggest_parameters", "validate",
]
