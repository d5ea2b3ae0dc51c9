"""Exception types shared across the package."""


class SimulationError(Exception):
    """Base class for all pmlimit errors."""


class NegativeDensity(SimulationError):
    """Density field has values below the -1e-12 tolerance."""


class DimensionUnsupported(SimulationError):
    """Operation not defined for this spatial dimension."""


class KernelUnbounded(SimulationError):
    """Custom drift kernel returned a non-finite value."""


class CflViolation(SimulationError):
    """Requested time step exceeds the stable step size."""


class PositivityLoss(SimulationError):
    """Scheme produced density below -1e-12 (indicates a bug, not clamped)."""


class NonFiniteField(SimulationError):
    """NaN or Inf appeared in a field during a run."""


class SupportTouchesBoundary(SimulationError):
    """Field is non-negligible on the outer cell layer where decay is required."""


class ConfigInvalid(SimulationError):
    """Run configuration failed validation.

    Carries a list of field-level messages in .messages.
    """

    def __init__(self, messages):
        if isinstance(messages, str):
            messages = [messages]
        self.messages = list(messages)
        super().__init__("; ".join(self.messages))


class IoFailure(SimulationError):
    """File export/import failed; .path holds the offending path."""

    def __init__(self, message, path):
        self.path = str(path)
        super().__init__(f"{message}: {self.path}")
