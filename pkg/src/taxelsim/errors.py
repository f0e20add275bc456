"""Exception types raised across taxelsim.

Everything derives from ``ValueError`` so callers that only care about bad
input can keep catching that.
"""


class TaxelSimError(ValueError):
    """Base class for every taxelsim error."""

    exit_code = 1


class InvalidRotationError(TaxelSimError):
    """A matrix expected to be in SO(3) is not orthonormal with det +1."""


class DegenerateInputError(TaxelSimError):
    """Input that has no well-defined result (zero vector, parallel columns)."""


class ModelMismatchError(TaxelSimError):
    """Joint state dimensions do not match the hand model."""


class InvalidShapeError(TaxelSimError):
    """An object shape has non-positive sizes or an open/non-convex mesh."""


class ContractViolationError(TaxelSimError):
    """A precondition of a pure function was broken by the caller."""


class DegenerateFitError(TaxelSimError):
    """Calibration data cannot determine a slope."""


class ConfigError(TaxelSimError):
    """Invalid configuration; the message names the offending path."""

    exit_code = 2

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class PoisonedStateError(TaxelSimError):
    """A non-finite value appeared in the simulation state."""

    exit_code = 3


class PolicyError(TaxelSimError):
    """The action provider raised or returned an unusable action."""

    def __init__(self, step: int, message: str):
        self.step = step
        super().__init__(f"[step {step}] {message}")
