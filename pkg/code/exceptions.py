"""Module to define the exceptions raised across the project.
"""


class InputError(ValueError):
    """Raised when a command line argument or an input file is not usable."""


class ChainSyntaxError(InputError):
    """Raised when a chain string does not follow the chain grammar."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class ResourceLimitError(RuntimeError):
    """Raised when a model or an enumeration outgrows a configured ceiling."""

    def __init__(self, limit: str, value: int, ceiling: int):
        super().__init__(f"{limit} = {value} exceeds the ceiling of {ceiling}")
        self.limit = limit
        self.value = value
        self.ceiling = ceiling


class UndefinedInvariantError(ValueError):
    """Raised when an invariant is requested outside of its domain."""


class GluingConditionError(ValueError):
    """Raised when piece weights leave paired turns with unequal counts."""
