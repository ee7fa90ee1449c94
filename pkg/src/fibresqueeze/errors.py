"""Exception types shared across the package."""


class SimulationError(RuntimeError):
    """Base class for runtime numerical failures."""


class ClippingError(SimulationError):
    """Raised when the field spectrum reaches the edge of the frequency grid."""

    def __init__(self, step, fraction):
        self.step = step
        self.fraction = fraction
        super().__init__(
            f"spectral clipping at step {step}: {fraction:.3g} of the energy "
            "sits in the outer frequency bins; enlarge n_samples or shrink the window"
        )


class NumericalError(SimulationError):
    """Raised when the integration produces NaN or overflow."""


class UndefinedError(ValueError):
    """Raised when a requested quantity has no meaning for the given input."""
