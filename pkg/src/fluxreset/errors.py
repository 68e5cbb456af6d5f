"""Exception hierarchy shared across the package."""


class FluxresetError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(FluxresetError, ValueError):
    """A physical argument is outside the model's domain of validity."""


class ConfigError(FluxresetError, ValueError):
    """Configuration is malformed, inconsistent, or fails validation."""


class IntegrationError(FluxresetError, RuntimeError):
    """The ODE integrator failed to advance the state.

    Carries the time (seconds) the integration reached before failing.
    """

    def __init__(self, message: str, t_reached: float | None = None):
        super().__init__(message)
        self.t_reached = t_reached


class IntegrityError(FluxresetError, RuntimeError):
    """A computed state violates an invariant beyond tolerance."""
