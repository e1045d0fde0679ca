"""Duration-aware training and in-situ pulse-stretch calibration of Rzx circuits."""

from .errors import (AmplitudeSaturationError, CapacityError, ConfigurationError,
                     ContractViolation, DivergenceError, IllPosedFitError,
                     InfeasibleCalibrationError, QupadError, UnsupportedGateError)
from .quantum import Circuit, Gate, Observable, Param

__version__ = "0.1.0"

__all__ = [
    "AmplitudeSaturationError", "CapacityError", "Circuit", "ConfigurationError",
    "ContractViolation", "DivergenceError", "Gate", "IllPosedFitError",
    "InfeasibleCalibrationError", "Observable", "Param", "QupadError", "UnsupportedGateError",
]
