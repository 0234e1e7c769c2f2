"""Exception types shared across the package."""


class InvalidParameterError(ValueError):
    """A model parameter violates its domain (e.g. nonpositive width)."""


class InvalidPriorError(ValueError):
    """A prior has no support on the decoding grid or is malformed."""


class UndefinedEstimateError(ArithmeticError):
    """The decoder has no defined output for this response (all-zero WAD)."""


class DegenerateConfigurationError(RuntimeError):
    """A simulation could not produce defined estimates within its retry budget."""


class DatasetError(ValueError):
    """Malformed or invalid rating data."""
