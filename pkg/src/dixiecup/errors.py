"""Exception and warning types raised by the library."""


class DixieError(Exception):
    """Base class for all library errors."""


class NonBracketable(DixieError, ValueError):
    """The centering equation n*Q_m(b) = 1 has no positive root (n <= 1)."""


class TooLarge(DixieError, ValueError):
    """Exact inclusion-exclusion would enumerate more terms than the guard allows."""


class DomainExit(DixieError, ValueError):
    """A radial path leaves the open probability simplex."""


class TruncationInsufficient(DixieError, ArithmeticError):
    """An infinite product could not be truncated within the certified bound."""


class CancellationWarning(UserWarning):
    """Alternating inclusion-exclusion lost more than the tolerated relative accuracy."""


class QuadratureNonConvergence(UserWarning):
    """Adaptive quadrature did not reach its error target; best value returned."""
