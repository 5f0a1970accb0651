"""Exception types shared across the package."""


class ManifoldMismatchError(ValueError):
    """Operands live on different manifolds (kind or resolution)."""


class UnsupportedManifoldError(ValueError):
    """Operation is not defined for this manifold kind."""


class TangencyError(ValueError):
    """A sphere field has a normal component."""


class SolvabilityError(ValueError):
    """Right-hand side violates a solvability condition (e.g. non-zero mean)."""


class InvariantViolation(ValueError):
    """A constructed object fails its structural invariants."""


class InjectivityError(ValueError):
    """Two maps are too far apart for a well-defined shortest displacement."""


class ConvergenceError(RuntimeError):
    """An iteration did not reach its tolerance."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class BlowUpError(RuntimeError):
    """Solution amplitude grew past the configured factor."""


class CFLError(ValueError):
    """Time step too large for the advective speed."""
