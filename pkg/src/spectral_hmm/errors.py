"""Exception and warning types raised by the learners."""


class SpectralError(ArithmeticError):
    """Base class for numerical failures in spectral learning.

    ``diagnostics`` carries whatever the failing step had computed so far.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class SpectralInstability(SpectralError):
    """Eigen-structure unusable: complex eigenvalues, collapsed gaps, non-convergence."""

    def __init__(self, message, diagnostics=None, attempts=None):
        super().__init__(message, diagnostics)
        self.attempts = list(attempts or [])


class DegenerateMoments(SpectralError):
    """Whitened moment matrix is (numerically) singular."""


class DegenerateQuantiles(ValueError):
    """Quantile bounds collide, so bins would be empty."""


class DivisionGuard(RuntimeWarning):
    """An estimated probability was floored before being inverted."""
