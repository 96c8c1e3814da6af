"""Exception types shared across the toolkit."""


class CwssError(Exception):
    """Base class for all toolkit errors."""


class ConfigurationError(CwssError, ValueError):
    """Invalid profile, parameter, or option value."""


class DimensionError(CwssError, ValueError):
    """Shape or size mismatch between operands."""


class UndefinedSnrError(CwssError, ValueError):
    """SNR is undefined because the signal has zero energy."""


class NormalizationError(CwssError, ValueError):
    """A quantity that must be normalized has zero total."""


class SolverError(CwssError, RuntimeError):
    """The cone solver could not be set up for the given problem."""
