"""
Error types for the toolkit.

Every failure raised by the library derives from QHError. ValidationError
marks inputs that break a precondition (exit code 2 from the CLI) and
NumericalError marks a computation that could not finish (exit code 3).
"""
from typing import Any, Optional, Tuple

import Util_Config as config


class QHError(Exception):
    exit_code = config.EXIT_NUMERICAL


class ValidationError(QHError):
    exit_code = config.EXIT_VALIDATION


class NumericalError(QHError):
    exit_code = config.EXIT_NUMERICAL


# --- Validation failures ---

class ConfigError(ValidationError):
    pass


class InvalidMassError(ValidationError):
    pass


class InvalidParamsError(ValidationError):
    pass


class ManevOnlyError(ValidationError):
    """Raised when an operation needs a = 1 and beta > 0."""


class DegenerateTermError(ValidationError):
    """Raised when one of the two potential terms is switched off but both are needed."""


class NotOnSphereError(ValidationError):
    pass


class ConstraintError(ValidationError):
    pass


class ZeroSizeError(ValidationError):
    pass


class OffManifoldError(ValidationError):
    pass


class EnergySignError(ValidationError):
    pass


class AdmissibilityError(ValidationError):
    pass


class NotCentralError(ValidationError):
    pass


# --- Numerical failures ---

class CollisionError(NumericalError):
    pass


class NoConvergenceError(NumericalError):
    def __init__(self, message: str, residual: float = float("nan"), ordering: Optional[Tuple[int, ...]] = None):
        super().__init__(message)
        self.residual = residual
        self.ordering = ordering


class BracketError(NumericalError):
    pass


class ToleranceError(NumericalError):
    pass


class DegenerateError(NumericalError):
    pass


class MismatchError(NumericalError):
    def __init__(self, message: str, expected: Any = None, counted: Any = None):
        super().__init__(message)
        self.expected = expected
        self.counted = counted


class StiffnessError(NumericalError):
    def __init__(self, message: str, trajectory: Any = None):
        super().__init__(message)
        self.trajectory = trajectory


class FieldError(NumericalError):
    def __init__(self, message: str, trajectory: Any = None):
        super().__init__(message)
        self.trajectory = trajectory


class DegenerateStateError(NumericalError):
    pass
