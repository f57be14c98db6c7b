"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class InvalidRgpdParams(DomainError):
    """RGPD parameters that do not give a strictly increasing cdf."""


class NumericError(ArithmeticError):
    """A numerical routine failed to converge or produced a non-finite value."""


class RgpdFitError(NumericError):
    """RGPD likelihood maximisation did not converge.

    ``best`` holds the best point seen (an ``RgpdParams`` or ``None``) and
    ``loglik`` its log-likelihood, so callers can still inspect or use it.
    """

    def __init__(self, message, best=None, loglik=float("nan")):
        super().__init__(message)
        self.best = best
        self.loglik = loglik
