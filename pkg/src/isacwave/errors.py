"""Exception types shared across the package."""


class IsacwaveError(Exception):
    """Base class for all package errors."""


class ConfigError(IsacwaveError):
    """A configuration or scene failed validation.

    ``reason`` is a short machine-readable tag naming the violated
    invariant (for example ``"infeasible_illumination"``).
    """

    def __init__(self, reason: str, message: str):
        super().__init__(message)
        self.reason = reason


class InfeasibleError(IsacwaveError):
    """A constraint set turned out to be (numerically) empty."""


class PowerIterationError(IsacwaveError):
    """Power iteration failed to converge within its iteration cap."""


class DegenerateMainlobeError(IsacwaveError):
    """The ambiguity mainlobe power is zero, so normalization is undefined."""
