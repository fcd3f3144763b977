"""Exception types raised across the package."""


class DelassoError(Exception):
    """Base class for all package errors."""


class NotPositiveDefinite(DelassoError):
    pass


class NonFinite(DelassoError):
    pass


class MaxIterations(DelassoError):
    """Raised only when the caller asks for strict convergence."""


class DegenerateResidual(DelassoError):
    pass


class DegenerateTau(DelassoError):
    def __init__(self, node, tau_sq):
        super().__init__(f"nodewise regression {node}: tau^2 = {tau_sq:.3e} <= 0")
        self.node = node
        self.tau_sq = tau_sq


class ShapeMismatch(DelassoError, ValueError):
    pass


class ZeroVariance(DelassoError):
    pass


class DomainError(DelassoError, ValueError):
    pass


class BadK(DelassoError, ValueError):
    pass


class TooLarge(DelassoError):
    pass


class ConfigError(DelassoError, ValueError):
    pass
