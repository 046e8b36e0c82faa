"""Exception types shared across the engine."""


class SsmError(Exception):
    """Base class for all engine errors."""


class DimensionError(SsmError, ValueError):
    """Shapes of inputs do not line up; message states the offending sizes."""


class SvdConvergenceError(SsmError, RuntimeError):
    """SVD failed to converge; message carries the matrix dimensions."""


class StatismoFormatError(SsmError, ValueError):
    """A Statismo HDF5 container is missing data or is inconsistent."""


class PlyFormatError(SsmError, ValueError):
    """A PLY payload cannot be parsed or uses unsupported features."""


class ComputationCancelled(SsmError, RuntimeError):
    """A long-running solve was cancelled by its caller."""
