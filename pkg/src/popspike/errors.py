"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """A parameter, shape, or option is inconsistent with the network/task setup."""


class InputError(ValueError):
    """A runtime input (observation, action) is malformed, e.g. non-finite."""


class InternalError(RuntimeError):
    """An internal contract was violated, e.g. an incomplete forward trace."""


class OracleSizeError(ConfigurationError):
    """The unrolled-graph gradient oracle refuses instances above its size guard."""


class NonSmoothPathError(ConfigurationError):
    """Finite differences were requested through a spiking (non-smooth) path."""


class ConversionError(ValueError):
    """DNN-to-SNN conversion failed, e.g. division by a zero activation maximum."""


class AccumulatorOverflowError(RuntimeError):
    """Fixed-point simulation exceeded the exactly-representable accumulator range."""


class CheckpointError(Exception):
    """Base class for checkpoint I/O failures."""


class CheckpointVersionError(CheckpointError):
    """The file's format version is not recognized."""


class CheckpointTruncatedError(CheckpointError):
    """The file ended before the declared payload was read."""


class CheckpointShapeError(CheckpointError):
    """A tensor's declared shape is inconsistent with its payload."""


class DescriptorMismatchError(CheckpointError):
    """A checkpoint was applied to a task it was not trained for."""
