"""Exception hierarchy.  Everything raised on purpose derives from HybridError."""


class HybridError(Exception):
    """Base class for physics and configuration errors."""


class ConfigError(HybridError, ValueError):
    pass


class UnknownPresetError(ConfigError, KeyError):
    def __str__(self) -> str:  # KeyError would repr() the message
        return str(self.args[0]) if self.args else ""


class ConvergenceError(HybridError):
    """Root finding, integration or quadrature failed its accuracy check."""


class DegenerateParameterError(HybridError, ZeroDivisionError):
    """A denominator vanished exactly (e.g. M(Delta) = 0 with gamma_m = 0)."""


class SingularSystemError(HybridError):
    def __init__(self, message: str, condition: float | None = None):
        super().__init__(message)
        self.condition = condition


class IntegrationError(HybridError):
    """Time-domain integration diverged or could not proceed."""
