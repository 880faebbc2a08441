"""Exception and warning types raised across the package.

Validation problems derive from :class:`ValidationError` (a ``ValueError``),
numerical failures from :class:`SolverError`. The CLI maps the two families
to distinct exit codes.
"""


class BetheHessianError(Exception):
    """Base class for all package errors."""


class ValidationError(BetheHessianError, ValueError):
    """Invalid input data or parameters."""


class AsymmetricP(ValidationError):
    pass


class NegativeEntry(ValidationError):
    pass


class PiNotSimplex(ValidationError):
    pass


class ProbabilityOverflow(ValidationError):
    """Some P_ij / n exceeds 1."""


class DegreeRowMismatch(ValidationError):
    pass


class SubcriticalDegree(ValidationError):
    """Average degree d <= 1: no giant component, detection impossible."""


class IndexOutOfInformativeRange(ValidationError, IndexError):
    pass


class ParseError(ValidationError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SelfLoopRejected(ParseError):
    pass


class DuplicateEdgeRejected(ParseError):
    pass


class PoleAtWeight(ValidationError):
    """t^2 equals w_ij^2 for some edge weight."""


class ZeroParameter(ValidationError):
    pass


class TooLargeForDense(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


class BelowThreshold(ValidationError):
    """The model has no informative eigenvalue (r0 == 0)."""


class SolverError(BetheHessianError, RuntimeError):
    """A numerical routine failed."""


class NoConvergence(SolverError):
    def __init__(self, message, iterations=None, best_residual=None):
        self.iterations = iterations
        self.best_residual = best_residual
        super().__init__(
            f"{message} (iterations={iterations}, best residual={best_residual})"
        )


class FactorizationBreakdown(SolverError):
    pass


class ComplexDominance(SolverError):
    """Requested real-extremal eigenvalues are far from the real axis."""


class GapZero(SolverError):
    """The pseudo-eigenvalue lies in the spectrum of M restricted to E-perp."""


class DegenerateTie(UserWarning):
    """Two eigenvalues of Q share |mu| with opposite signs."""


class RankDeficientOverlap(UserWarning):
    """V^T Y is (numerically) singular."""
