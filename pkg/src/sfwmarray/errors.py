"""Exception hierarchy shared by all modules."""


class SfwmError(Exception):
    """Base class for every error raised by this package."""


class OutOfRange(SfwmError, ValueError):
    """Wavelength outside a material's validity window."""


class InvalidModel(SfwmError, ValueError):
    """Malformed material model or evaluation on a Sellmeier pole."""


class NumericalFailure(SfwmError, RuntimeError):
    pass


class ModeCutoff(SfwmError):
    """Requested mode order is not guided."""


class AmbiguousSupermodes(SfwmError):
    pass


class BracketError(SfwmError, ValueError):
    pass


class StepTooLarge(SfwmError, ValueError):
    pass


class IndexOutOfRange(SfwmError, IndexError):
    pass


class OutOfWindow(SfwmError, ValueError):
    """Frequency falls outside a dispersion channel's window."""


class DegenerateGrid(SfwmError, ValueError):
    pass


class NoPhasematch(SfwmError):
    pass


class DegenerateFlat(SfwmError):
    """Phase mismatch vanishes identically along the search line."""


class BoundaryMaximum(SfwmError):
    """Optimum sits on the edge of the search bracket."""


class ParseError(SfwmError, ValueError):
    pass


class ValidationError(SfwmError, ValueError):
    """Aggregates every violation found while validating a config."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class IoError(SfwmError, OSError):
    """Destination could not be written or a file could not be read."""
