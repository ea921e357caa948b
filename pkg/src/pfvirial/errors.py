"""Exception hierarchy shared by all modules."""


class PfvError(Exception):
    """Base class for every error raised by pfvirial."""


class SpecError(PfvError, ValueError):
    """A system description is malformed or violates an invariant."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class DimensionError(PfvError):
    """Hilbert-space dimension exceeds the configured cap."""


class DenseCapError(PfvError):
    """Dense diagonalization requested above the dense cap."""


class ConvergenceError(PfvError):
    """An iterative solver stopped before reaching its tolerance."""

    def __init__(self, message, best_residual=float("nan"), iterations=0):
        super().__init__(f"{message} (best residual {best_residual:.3e} after {iterations} iterations)")
        self.best_residual = best_residual
        self.iterations = iterations


class ScfError(ConvergenceError):
    """Mean-field cycle failed (max cycles or oscillation)."""


class DensityMismatchError(PfvError):
    """Full and auxiliary systems do not share density / mode displacement."""


class StateFileError(PfvError):
    """State file is corrupt or does not belong to the given system."""
