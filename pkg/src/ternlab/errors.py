"""Exception types shared across the package."""
from __future__ import annotations


class TernlabError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(TernlabError):
    """A configuration value or input field is malformed or out of range."""


class ParseError(TernlabError):
    """A config or data file could not be parsed."""


class UsageError(TernlabError):
    """Command line arguments are inconsistent or incomplete."""


# geometry
class Epsilon1TooLarge(ValidationError):
    """The first scale parameter must be strictly below one."""


class RatioViolation(ValidationError):
    """Consecutive scale parameters must stay within the monotone band."""


class DepthExceeded(ValidationError):
    """A level beyond the constructed depth was requested."""


class NonIntegerSquare(ValidationError):
    """An operation needs a square with integer corners and got something else."""


# subharmonic / growth
class Overflow(TernlabError):
    """A linear-domain value left the representable range; use the log path."""


class QuadratureFailure(TernlabError):
    """The quadrature error estimate did not meet the requested tolerance."""


class HypothesisFailed(TernlabError):
    """The zero-area hypothesis count exceeds the allowed budget."""


class GridTooCoarse(TernlabError):
    """Grid spacing is too large for the requested chain step."""


class ZeroBeta(TernlabError):
    """The goodness density vanishes, so no selection chain exists."""


class ConstraintViolation(ValidationError):
    """Selection parameters break a precondition of the procedure."""


class SelectionStranded(TernlabError):
    """A case fired whose promised subsquare does not exist at this small k."""


class IncompleteChain(TernlabError):
    """A certificate was requested from an empty or unfinished chain."""


class DiskOutOfRange(TernlabError):
    """The averaging disk leaves the sampled square."""


# dbar
class UnsupportedRhs(TernlabError):
    """The right-hand side grid is unusable (wrong shape or non-finite)."""


class WeightUnderflow(TernlabError):
    """The weight exponent left the representable range in linear mode."""


class DepthInfeasible(TernlabError):
    """The requested build depth cannot be represented at this resolution."""


# measures
class CoverageGap(TernlabError):
    """A sampling window is not covered by the requested region."""


class SamplerBudgetExceeded(TernlabError):
    """The sampler was asked for more points than its budget allows."""


# nevanlinna
class EvaluationFailure(TernlabError):
    """A function handle returned non-finite values where finite ones are needed."""


class CurveThroughPoint(TernlabError):
    """The sampled curve passes too close to the reference point."""


class GapTooSmall(TernlabError):
    """The separation needed by the coverage guarantee is absent."""
