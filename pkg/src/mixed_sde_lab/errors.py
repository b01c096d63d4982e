"""Exception types shared across the package."""

import numpy as np


class DomainError(ValueError):
    """A parameter lies outside the range where an operation is defined."""


class ShapeError(ValueError):
    """Inputs have incompatible grids, dimensions or component counts."""


class ResolutionError(ValueError):
    """The time grid is too coarse for the requested operation."""


class SolverError(RuntimeError):
    """A time-stepping scheme produced a non-finite state."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class CholeskyError(np.linalg.LinAlgError):
    """Dense Cholesky factorisation failed; ``pivot`` is the 1-based failing minor."""

    def __init__(self, message, pivot):
        super().__init__(message)
        self.pivot = pivot
