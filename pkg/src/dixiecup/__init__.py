"""Double Dixie cup collector: exact moments, Poissonized laws and limit-theorem checks."""

__version__ = "0.1.0"

from .centering import CenteringPair, solve_centering
from .errors import (
    CancellationWarning,
    DixieError,
    DomainExit,
    NonBracketable,
    QuadratureNonConvergence,
    TooLarge,
    TruncationInsufficient,
)
from .exact_moments import MomentReport, mean_variance, rising_moment_exact, rising_moment_quadrature
from .models import CollectorModel, ProbabilityVector

__all__ = [
    "__version__",
    "CancellationWarning",
    "CenteringPair",
    "CollectorModel",
    "DixieError",
    "DomainExit",
    "MomentReport",
    "NonBracketable",
    "ProbabilityVector",
    "QuadratureNonConvergence",
    "TooLarge",
    "TruncationInsufficient",
    "mean_variance",
    "rising_moment_exact",
    "rising_moment_quadrature",
    "solve_centering",
]
