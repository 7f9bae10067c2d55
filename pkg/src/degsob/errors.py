"""Exception types raised across the package."""


class DegsobError(Exception):
    """Base class for all package errors."""


class ParameterError(DegsobError, ValueError):
    """An exponent, radius or family parameter violates its constraint."""


class PreconditionError(DegsobError, ValueError):
    """An operation was called outside its stated preconditions."""


class EvaluationError(DegsobError, ArithmeticError):
    """A field or integrand produced a non-finite value.

    ``point`` holds the offending evaluation point when known.
    """

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class DefinitenessError(EvaluationError):
    """A matrix field has an eigenvalue below the definiteness floor."""


class DegenerateBallError(DegsobError, ZeroDivisionError):
    """A ball carries zero mass where a positive mass is required."""

    def __init__(self, message, ball=None):
        super().__init__(message)
        self.ball = ball


class RadiusError(PreconditionError):
    """A radius is too large for the compact set or domain at hand.

    ``center`` names the offending ball center when one exists.
    """

    def __init__(self, message, center=None):
        super().__init__(message)
        self.center = center


class DivergenceVerdict(DegsobError, ArithmeticError):
    """An integral is declared divergent by the power test.

    Attributes
    ----------
    locus : the singular face or point responsible
    exponent : the integrand exponent at that locus
    threshold : the integrability threshold the exponent failed
    partials : list of ``(eps, value)`` pairs, integrals with an
        ``eps``-neighbourhood of the locus removed; they grow monotonically
        as ``eps`` decreases and serve as the divergence certificate.
    """

    def __init__(self, message, locus=None, exponent=None, threshold=None, partials=()):
        super().__init__(message)
        self.locus = locus
        self.exponent = exponent
        self.threshold = threshold
        self.partials = list(partials)
