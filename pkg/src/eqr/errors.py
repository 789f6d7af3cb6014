"""Semantic exceptions shared across the package."""


class DomainError(ValueError):
    """An argument is outside the mathematical domain of an operation.

    Raised for non-finite inputs as well: NaN and Inf are rejected at the
    boundary instead of being propagated through numerics.
    """


class DataError(Exception):
    """A dataset could not be read or fails a structural contract."""


class TrainingError(RuntimeError):
    """Training aborted, e.g. on a non-finite loss. Carries diagnostics."""

    def __init__(self, message, *, epoch=None, batch=None):
        super().__init__(message)
        self.epoch = epoch
        self.batch = batch


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to converge to the requested tolerance."""
