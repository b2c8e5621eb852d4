"""Exception types shared across the package."""


class CoopDecodeError(Exception):
    """Base class for all package errors."""


class DimensionError(CoopDecodeError, ValueError):
    pass


class ParameterError(CoopDecodeError, ValueError):
    pass


class CapacityError(CoopDecodeError):
    """Requested object or enumeration exceeds the configured size cap."""


class TopologyError(CoopDecodeError, ValueError):
    def __init__(self, message, component=None):
        super().__init__(message)
        self.component = component


class InfeasibleError(CoopDecodeError):
    """A sub-problem has no completion satisfying its hard constraints."""

    def __init__(self, subproblem, pin):
        super().__init__(f"sub-problem {subproblem} is infeasible with its variable pinned to {pin}")
        self.subproblem = subproblem
        self.pin = pin


class InvariantViolation(CoopDecodeError):
    pass


class AlistParseError(CoopDecodeError, ValueError):
    def __init__(self, message, line=None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line
