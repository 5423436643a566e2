"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Unsupported or inconsistent configuration (bad k, size mismatch, ...)."""


class SearchError(RuntimeError):
    """A numerical search (e.g. design-SNR bisection) failed to meet its target."""
