"""Exception hierarchy shared by all occflow modules."""


class OccflowError(Exception):
    """Base class for every error raised by occflow."""


class ConfigurationError(OccflowError, ValueError):
    """Invalid parameters or configuration."""


class DimensionError(OccflowError, ValueError):
    """Shapes, lengths or grids do not match."""


class DomainError(OccflowError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class EmptyOccupationError(OccflowError, ValueError):
    """Operation requires at least one accumulation."""


class NoSolutionError(OccflowError, ValueError):
    """Root finding has no solution (e.g. price outside arbitrage bounds)."""


class ExtrapolationError(OccflowError, ValueError):
    """Requested range lies outside the quoted data."""


class SimulationError(OccflowError, RuntimeError):
    """Numerical failure during a simulation, with the offending state attached."""

    def __init__(self, message, *, step=None, path=None, state=None):
        super().__init__(message)
        self.step = step
        self.path = path
        self.state = state
