"""Exception hierarchy. Everything a caller may want to catch derives from
:class:`FracNoiseError`."""


class FracNoiseError(Exception):
    pass


class ConfigurationError(FracNoiseError, ValueError):
    """Invalid parameters or configuration."""


class NumericalError(FracNoiseError, ArithmeticError):
    """A numerical routine failed to reach its accuracy target."""


class WindowTooLargeError(FracNoiseError, ValueError):
    """Not enough increments for a single full pre-averaging window."""


class DegenerateInputError(FracNoiseError, ValueError):
    """Input carries no variation (e.g. a constant path)."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace or [])


class DataFormatError(FracNoiseError, ValueError):
    """Malformed input file."""


class AllFailedError(FracNoiseError):
    """Every unit of a replicated or phase-averaged computation failed."""
