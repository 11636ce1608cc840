"""Exception types raised by the package."""


class ReservoirError(Exception):
    """Base class for all package errors."""


class ParameterError(ReservoirError, ValueError):
    """A parameter or configuration value violates its constraints."""


class SolverError(ReservoirError):
    """A root polish or iterative solve did not converge."""


class SpinodalError(ReservoirError):
    """The linearized decay rate vanishes, so the relaxation time diverges."""


class ConvergenceError(ReservoirError):
    """A time integration did not reach its stopping condition."""


class DataError(ReservoirError, ValueError):
    """Input data is malformed (missing column, empty file, bad cell)."""


class DivergenceError(ReservoirError):
    """An integrated state left its allowed bound."""
