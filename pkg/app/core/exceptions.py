"""Exception hierarchy shared by the core modules and mapped to CLI exit codes."""


class NetEntError(Exception):
    """Base class for all domain errors."""


class DimensionError(NetEntError, ValueError):
    """Raised on mismatched or unsupported Hilbert-space dimensions."""


class DomainError(NetEntError, ValueError):
    """Raised when a parameter lies outside the domain of an operation."""


class GraphPreconditionError(NetEntError, ValueError):
    """Raised when a network violates a precondition (e.g. it is disconnected)."""


class SolverError(NetEntError, RuntimeError):
    """Raised when a numerical routine breaks down."""


class InputError(NetEntError, ValueError):
    """Raised when an input file or command-line value cannot be read or parsed."""
