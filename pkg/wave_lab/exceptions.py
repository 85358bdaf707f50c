class WaveLabError(Exception):
    """Base class for every error raised by the lab."""


class ScenarioError(WaveLabError, ValueError):
    """Scenario file could not be parsed or validated."""

    def __init__(self, message, errors=None):
        super().__init__(message)
        self.errors = errors or {}


class OrderExceeded(WaveLabError, ValueError):
    def __init__(self, family, k, max_order):
        super().__init__(f"{family}: derivative order {k} exceeds max_derivative_order {max_order}")
        self.k = k
        self.max_order = max_order


class CoefficientDomainError(WaveLabError, ValueError):
    """Coefficient evaluated outside its domain (t < 0 for most families)."""


class QuadratureError(WaveLabError, ArithmeticError):
    def __init__(self, message, achieved_tol):
        super().__init__(f"{message} (achieved tolerance {achieved_tol:.3e})")
        self.achieved_tol = achieved_tol


class InversionError(WaveLabError, ArithmeticError):
    """Primitive of a shape function could not be inverted at the requested time."""


class IntegrationError(WaveLabError, ArithmeticError):
    """Base class for mode-integration failures."""


class StepSizeUnderflow(IntegrationError):
    def __init__(self, time, step):
        super().__init__(f"step size underflow at t={time:.17g} (h={step:.3e})")
        self.time = time
        self.step = step


class ToleranceNotAchieved(IntegrationError):
    def __init__(self, time, reason):
        super().__init__(f"tolerance not achieved at t={time:.17g}: {reason}")
        self.time = time


class PreconditionError(WaveLabError, ValueError):
    """An analysis was called on inputs its preconditions exclude."""


class GridMismatch(WaveLabError, ValueError):
    """Spectral data, trajectories or spatial grids do not fit together."""


class DegenerateWindow(WaveLabError, ValueError):
    """A fit window holds too few samples or non-positive values."""


class InadmissibleExponents(WaveLabError, ValueError):
    """(n, p, q) combination not covered by the requested theorem."""


class EstimatorError(WaveLabError, ArithmeticError):
    """Diffusion-constant estimation failed."""
