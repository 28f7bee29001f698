"""Exception types shared across the package."""


class QuadncError(Exception):
    """Base class for all package-specific errors."""


class BadParam(QuadncError):
    """A parameter is outside its admissible range."""


class BadVariant(QuadncError):
    """Unknown bubble-polynomial variant (only l = 1, 2 exist)."""


class SingularMap(QuadncError):
    """The cell-to-reference map is singular (degenerate or bow-tie cell)."""


class Degenerate(QuadncError):
    """A geometric construction lost rank beyond tolerance."""


class NotUnisolvent(QuadncError):
    """Midpoint degrees of freedom do not determine the local space."""


class NonManifold(QuadncError):
    """An edge is shared by more than two cells."""


class ConvexityFailure(QuadncError):
    """Mesh perturbation could not produce an all-convex mesh."""


class SingularInterior(QuadncError):
    """Interior block of a local matrix is numerically singular."""


class NoConvergence(QuadncError):
    """Iterative solver failed to reach its tolerance.

    Carries the best iterate and its relative residual so callers can
    inspect or reuse partial progress.
    """

    def __init__(self, message, best_x=None, residual=None, iterations=None):
        super().__init__(message)
        self.best_x = best_x
        self.residual = residual
        self.iterations = iterations
