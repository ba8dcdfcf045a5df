"""Exception types shared across the package."""


class ProxyHedgeError(Exception):
    """Base class for all package errors."""


class ModelError(ProxyHedgeError, ValueError):
    """Market model inputs violate an invariant."""


class FactorizationError(ProxyHedgeError, RuntimeError):
    """The simultaneous-diagonalization solve failed or is ill-posed."""


class NumericsError(ProxyHedgeError, RuntimeError):
    """A PDE solve or readout failed (positivity loss, divergence, domain)."""


class ConfigError(ProxyHedgeError, ValueError):
    """Config file is missing, malformed, or violates an invariant."""
