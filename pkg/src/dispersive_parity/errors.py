"""Exception hierarchy. The CLI maps each family onto an exit code."""


class ParityError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(ParityError, ValueError):
    """Malformed spec or config; carries a field path where one is known."""

    def __init__(self, message: str, path: str | None = None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class RegimeError(ParityError):
    """The physics left the regime an approximation is valid in."""


class DispersiveBoundError(RegimeError):
    def __init__(self, message: str, g: float | None = None, delta: float | None = None):
        self.g = g
        self.delta = delta
        super().__init__(message)


class OverlapError(RegimeError):
    """Eigenstate labeling failed: some eigenvector is not dominated by its bare label."""

    def __init__(self, message: str, label=None, overlap: float | None = None):
        self.label = label
        self.overlap = overlap
        super().__init__(message)


class NearDegenerateError(RegimeError):
    def __init__(self, message: str, pair=None, gap: float | None = None):
        self.pair = pair
        self.gap = gap
        super().__init__(message)


class NumericalError(ParityError):
    """Step size too coarse, non-finite values, dimension overflow and the like."""
