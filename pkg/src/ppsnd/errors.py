"""Exception types raised across the package."""


class PPSNDError(Exception):
    """Base class for every error raised by ppsnd."""


class ConfigurationError(PPSNDError, ValueError):
    pass


class DomainError(PPSNDError, ValueError):
    """An argument lies outside the domain an operation accepts."""


class KeyMismatchError(DomainError):
    pass


class DecryptionError(PPSNDError):
    pass


class RangingError(PPSNDError):
    pass


class DecodeError(PPSNDError, ValueError):
    pass


class IssuanceError(PPSNDError):
    pass


class AuthenticationError(PPSNDError):
    pass


class WalletExhaustedError(PPSNDError):
    pass


class RateLimitedError(PPSNDError):
    pass


class SimulationError(PPSNDError):
    pass


class SummaryError(PPSNDError, ValueError):
    pass
