"""Exception types shared across the package."""


class NumericalError(RuntimeError):
    """A solver produced non-finite values or a defining equation has no root."""
