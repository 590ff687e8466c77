"""Exception types shared across the package."""


class OrlishapeError(Exception):
    """Base class for package-specific failures."""


class YoungFunctionError(OrlishapeError, ValueError):
    """Invalid Young-function construction or evaluation."""


class DivergentIntegralError(OrlishapeError, ArithmeticError):
    """The lower part of a growth-conjugation integral does not converge."""


class ExpressionError(OrlishapeError, ValueError):
    """Malformed growth-function expression string."""


class MeshError(OrlishapeError, ValueError):
    """Invalid mesh construction parameters or corrupt mesh data."""


class NormalizationError(OrlishapeError, RuntimeError):
    """A field cannot be rescaled to unit boundary modular."""


class InfeasibleConstraintError(OrlishapeError, RuntimeError):
    """The vanishing constraint leaves no admissible fields."""


class DegenerateMultiplierError(OrlishapeError, RuntimeError):
    """Constraint gradient is numerically zero; no multiplier estimate."""


class ConfigError(OrlishapeError, ValueError):
    """Experiment configuration file cannot be parsed or validated."""
