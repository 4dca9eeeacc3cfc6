"""Exception taxonomy shared across the package."""


class WarpGPError(Exception):
    """Base class for all package errors."""


class KernelError(WarpGPError):
    """Malformed kernel expression or invalid kernel evaluation."""


class MissingChannelError(KernelError):
    """A kernel leaf selects the original channel but the input has none."""


class HyperDimensionError(KernelError):
    """Hyperparameter vector length does not match the kernel."""


class KernelParseError(KernelError):
    """Kernel expression text could not be parsed."""

    def __init__(self, message, position):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class DataError(WarpGPError):
    """Bad input data: missing file, malformed CSV, degenerate series."""


class NotPositiveDefinite(WarpGPError):
    """Covariance matrix not factorizable even with maximum jitter."""


class AllRestartsFailed(WarpGPError):
    """Every optimization restart ended in a numerical failure."""
