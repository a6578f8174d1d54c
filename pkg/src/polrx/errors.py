"""Exception types shared across the simulator."""


class PolrxError(Exception):
    """Base class for all simulator-specific errors."""


class ParameterError(PolrxError, ValueError):
    """A configuration value or call argument is out of its valid range."""


class DegenerateInputError(PolrxError, ValueError):
    """Input data is structurally unusable (empty, all-zero, zero-magnitude...)."""


class PilotNotFoundError(PolrxError, RuntimeError):
    """No pilot tone detected within the search band."""


class SyncFailureError(PolrxError, RuntimeError):
    """Header correlation did not produce an unambiguous alignment peak."""


class ClippingError(PolrxError, RuntimeError):
    """Too many ADC samples hit the converter rails."""


class CalibrationError(PolrxError, RuntimeError):
    """Noise calibration produced unusable variances."""


class EstimateDegenerateError(PolrxError, RuntimeError):
    """Channel estimation failed (non-positive correlation, too few points)."""


class DivergenceError(PolrxError, RuntimeError):
    """Adaptive equalizer diverged."""

    def __init__(self, step: int, message: str | None = None):
        self.step = step
        super().__init__(message or f"equalizer diverged at step {step}")


class FockCutoffError(PolrxError, RuntimeError):
    """Fock-basis truncation too small for the requested mean photon number."""


class NumericalDomainError(PolrxError, RuntimeError):
    """An intermediate quantity left its mathematically valid domain."""
