"""Exception types shared across the package."""


class ExtraLabError(Exception):
    """Base class for all errors raised by extra_lab."""


class ParameterError(ExtraLabError, ValueError):
    """A scalar argument is outside its admissible range."""


class ShapeError(ExtraLabError, ValueError):
    """An array argument has an incompatible shape."""


class GraphError(ExtraLabError, ValueError):
    """Invalid graph construction request or disconnected input."""


class MixingError(ExtraLabError, ValueError):
    """A mixing matrix violates one of the validation checks.

    ``check`` names the failed condition: one of ``"symmetry"``,
    ``"sparsity"``, ``"spectral"``, ``"positivity"``, ``"contraction"``.
    """

    def __init__(self, check: str, message: str):
        super().__init__(f"{check}: {message}")
        self.check = check


class DivergenceError(ExtraLabError, RuntimeError):
    """Iterates became non-finite or exceeded the magnitude cap.

    Carries the iteration index at which divergence was detected and,
    when raised from a run loop, the partial run record collected so far.
    """

    def __init__(self, iteration: int, message: str = ""):
        super().__init__(message or f"divergence detected at iteration {iteration}")
        self.iteration = iteration
        self.record = None


class ProtocolError(ExtraLabError, RuntimeError):
    """A synchronous round is missing a required neighbor message."""


class ConfigError(ExtraLabError, ValueError):
    """Configuration file failed to parse or validate."""


class OutputExistsError(ExtraLabError, RuntimeError):
    """Refusing to overwrite existing output files without --overwrite."""
