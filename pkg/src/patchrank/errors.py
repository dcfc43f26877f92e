class PatchRankError(Exception):
    """Base class for all errors raised by patchrank."""


class ParameterError(PatchRankError, ValueError):
    pass


class StructuralError(PatchRankError, ValueError):
    """Array dimensions do not agree with each other."""


class NumericError(PatchRankError, ArithmeticError):
    """A numerical routine failed or produced non-finite values."""

    def __init__(self, message, iteration=None, variable=None):
        super().__init__(message)
        self.iteration = iteration
        self.variable = variable


class InputError(PatchRankError, ValueError):
    pass


class BackgroundUnavailable(PatchRankError):
    """No background ring patch survives clipping to the frame."""


class TrackingLost(PatchRankError):
    """No candidate window fits inside the frame."""
