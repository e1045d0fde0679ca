"""Exception types shared across the pipeline.

The CLI maps these onto exit codes: configuration problems exit 2, numeric
failures exit 3 and infeasible calibrations exit 4.
"""


class QupadError(Exception):
    pass


class ConfigurationError(QupadError, ValueError):
    """Inputs are inconsistent with the device or with each other."""


class CapacityError(QupadError, ValueError):
    pass


class UnsupportedGateError(QupadError, TypeError):
    pass


class ContractViolation(QupadError, ValueError):
    """A caller passed a value outside an operation's documented domain."""


class AmplitudeSaturationError(QupadError, ValueError):
    """An area-preserving stretch would need |A| > 1."""


class IllPosedFitError(QupadError, ValueError):
    pass


class DivergenceError(QupadError, ArithmeticError):
    def __init__(self, message, params=None, iteration=None):
        super().__init__(message)
        self.params = params
        self.iteration = iteration


class InfeasibleCalibrationError(QupadError):
    pass
