"""Exceptions and warnings raised by epi_denoise."""


class EpiDenoiseError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(EpiDenoiseError, ValueError):
    """Experiment configuration or CLI arguments are invalid."""


class InputDataError(EpiDenoiseError, ValueError):
    """An input data file (edge list, county cases) is malformed."""


class EdgeListError(InputDataError):
    """An edge-list or adjacency file could not be parsed.

    Attributes
    ----------
    line_number (int): 1-based line of the offending entry, 0 if unknown.
    """

    def __init__(self, message: str, line_number: int = 0) -> None:
        """Initialize EdgeListError with the failing line number."""
        if line_number:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class AssumptionViolation(EpiDenoiseError, ValueError):
    """Epidemic parameters break the well-posedness condition of the SIS model."""


class SpectralError(EpiDenoiseError, ArithmeticError):
    """The eigen-solver failed to converge."""


class DisconnectedGraphWarning(RuntimeWarning):
    """A graph is disconnected; the denoiser solves each component separately."""
