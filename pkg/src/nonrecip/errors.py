"""Exception types raised by the numerical routines."""


class NonrecipError(Exception):
    """Base class for every numerical failure in this package."""


class SingularDenominatorError(NonrecipError, ArithmeticError):
    """The auxiliary-site propagator has a pole on the evaluation point."""


class SingularMatrixError(NonrecipError, ArithmeticError):
    """A frozen-frequency matrix is (numerically) singular."""


class QuadratureError(NonrecipError):
    """Adaptive quadrature failed to reach the requested tolerance."""


class DegenerateFitError(NonrecipError, ValueError):
    pass


class DefectiveMatrixError(NonrecipError, ArithmeticError):
    """Eigenvector matrix too ill-conditioned to trust a spectral method."""
