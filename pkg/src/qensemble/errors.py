"""Exception hierarchy shared by all modules."""


class QEnsembleError(Exception):
    """Base class for every error raised by the package."""


class DomainError(QEnsembleError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class NonConvergent(QEnsembleError):
    """A truncated series did not meet its tail bound within the depth cap."""


class DivisionByVanishingProduct(QEnsembleError, ZeroDivisionError):
    """A Pochhammer denominator has a vanishing factor."""


class ZeroArgument(DomainError):
    """A q-difference quotient was requested at x = 0."""


class PoleError(DomainError):
    """q-Gamma evaluated at a pole."""


class IllConditioned(QEnsembleError):
    """Orthogonalization pivot collapsed below the conditioning guard."""


class RouteMismatch(QEnsembleError):
    """Two independent computation routes disagree beyond tolerance."""

    def __init__(self, what, first, second, tol):
        self.what = what
        self.first = first
        self.second = second
        self.tol = tol
        super().__init__(f"{what}: routes disagree ({first!r} vs {second!r}, tol {tol:g})")


class OddDimension(DomainError):
    """Pfaffian requested for an odd-dimensional matrix."""


class NotSkew(DomainError):
    """Matrix is not skew-symmetric within tolerance."""


class SingularTau(QEnsembleError):
    """An even principal Pfaffian vanished, so the skew Borel step fails."""


class VanishingBeta(QEnsembleError):
    """The odd-particle normalization beta_{2n} vanished."""


class NotSelfDual(DomainError):
    """Quaternion matrix is not self-dual within tolerance."""


class TermBudgetExceeded(QEnsembleError):
    """Brute-force enumeration would exceed its term budget."""


class MixedEndpoint(DomainError):
    """Two lattice points sit on anchors with no defined s-kernel rule."""
