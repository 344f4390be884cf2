"""Exception types shared across the package."""


class InputError(ValueError):
    """Raised for invalid user-supplied data, parameters, or files."""


class SolverError(RuntimeError):
    """Raised when a numerical routine fails to meet its accuracy contract."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
