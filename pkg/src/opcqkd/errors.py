"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Raised when array shapes are incompatible with an operation."""


class ContractError(ValueError):
    """Raised when an input violates an operation's precondition."""


class ParameterError(ValueError):
    """Raised for physically invalid parameters (e.g. an unbounded conjugator gain)."""


class ConfigError(ValueError):
    """Raised when a session configuration cannot be parsed or is contradictory."""
