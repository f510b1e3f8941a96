"""Exception types shared by every module."""


class DistTestError(Exception):
    pass


class DomainError(DistTestError, ValueError):
    """An argument lies outside the operation's domain."""


class ResourceError(DistTestError, RuntimeError):
    """A desk-scale size guard was exceeded."""


class ConfigError(DistTestError, ValueError):
    """Invalid configuration (plugin contract, ledger override, CLI input)."""


class NumericalError(DistTestError, RuntimeError):
    """An iterative solver failed to converge."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class DegenerateGeometryError(DistTestError, RuntimeError):
    """A rounded lattice basis came out singular."""
