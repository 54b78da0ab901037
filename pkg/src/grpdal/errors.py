"""Exception types raised across the package."""


class GRPDALError(Exception):
    """Base class for all package errors."""


class InvalidArgument(GRPDALError, ValueError):
    pass


class PreconditionViolation(GRPDALError):
    pass


class DomainViolation(GRPDALError):
    """A function was evaluated outside its effective domain."""


class UnsupportedFunction(GRPDALError):
    """No closed-form proximal operator or conjugate for this descriptor."""


class CertificateFailed(GRPDALError):
    def __init__(self, message, certificate=None):
        super().__init__(message)
        self.certificate = certificate


class InexactSolveFailed(GRPDALError):
    def __init__(self, message, best_gap=float("inf"), iterations=0):
        super().__init__(message)
        self.best_gap = best_gap
        self.iterations = iterations


class InternalError(GRPDALError):
    """A theoretical guarantee was violated at runtime."""


class ConfigError(GRPDALError):
    pass
