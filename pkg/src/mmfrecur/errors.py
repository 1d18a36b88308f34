"""Exception types shared across the package."""


class ParameterError(ValueError):
    """An argument is outside its valid domain."""


class BookStateError(RuntimeError):
    """The order book cannot serve a request in its current state."""


class SimulationError(RuntimeError):
    """A simulation run degenerated and produced no usable returns."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class EmptyIntervalsError(ValueError):
    """Too few threshold exceedances to form a single interval."""


class FitError(RuntimeError):
    """A nonlinear fit failed to converge from every starting point."""
