"""Exception types shared across the package."""


class CqsmError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(CqsmError):
    """Invalid run configuration; carries the offending field name."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class SingularPointError(CqsmError):
    """Field evaluation requested at a point where it is undefined (x = 0)."""


class HypothesisViolationError(CqsmError):
    """A configuration fails the differentiability/scalarity assumptions
    required by the bound machinery."""


class UnsupportedConfigurationError(CqsmError):
    """Operation defined only for a restricted field class (e.g. constant
    internal direction)."""


class NonConvergenceError(CqsmError):
    """An iterative solve ran out of iterations before reaching tolerance."""


class TruncatedSpectrumError(CqsmError):
    """A spectrum result hit max_pairs; counts derived from it would be
    lower bounds only."""
