"""Exception hierarchy shared by the library, the CLI and the MCP server.

Each class carries the process exit code the CLI reports for it.
"""


class MaxConsError(Exception):
    """Base class for every error raised by maxcons."""

    exit_code = 1


class InputError(MaxConsError, ValueError):
    """An argument, file or configuration value is invalid."""

    exit_code = 2


class GraphValidationError(InputError):
    """Edge list has duplicates, self-loops or out-of-range nodes."""


class ConnectivityError(InputError):
    """Graph is disconnected where a connected graph is required."""


class DomainError(InputError):
    """Argument lies outside the domain of an operation."""


class ShapeError(InputError):
    """Max-plus operands have incompatible dimensions."""


class InstanceTooLargeError(InputError):
    """Exhaustive oracle asked to enumerate an instance past its size cap."""


class ConfigError(InputError):
    """Experiment configuration could not be loaded or validated."""


class NumericError(MaxConsError, ArithmeticError):
    """A numerical procedure failed."""

    exit_code = 3


class ConvergenceError(NumericError):
    """Iterative method hit its iteration cap."""


class RangeError(NumericError):
    """Exact integer result exceeds the representable range."""


class UnsupportedModelError(NumericError):
    """Noise model lacks what the operation needs (finite MGF, non-degenerate law)."""


class InvariantError(MaxConsError):
    """A selfcheck invariant failed."""

    exit_code = 4
