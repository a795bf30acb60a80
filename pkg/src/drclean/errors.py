"""Exception types raised across the package."""


class DrcleanError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(DrcleanError, ValueError):
    """Array shapes or sizes are inconsistent with the operation."""


class ConfigurationError(DrcleanError, ValueError):
    """Invalid or incompatible configuration (e.g. estimand/dictionary pair)."""


class DegenerateFitError(DrcleanError, RuntimeError):
    """The design matrix carries no usable signal (all-zero or rank zero)."""


class NumericalError(DrcleanError, RuntimeError):
    """A numerical routine (SVD, eigendecomposition) failed to converge."""


class WeakInstrumentError(DrcleanError, RuntimeError):
    """Ratio estimand denominator is numerically zero."""


class EmptyKernelWindowError(DrcleanError, RuntimeError):
    """All kernel weights vanished: no observations near the target point."""
