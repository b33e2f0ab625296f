"""Exception types shared by every module."""


class BlppError(Exception):
    """Base class for package errors."""


class ConfigurationError(BlppError, ValueError):
    """Invalid grid, window or experiment configuration."""


class DomainError(BlppError, ValueError):
    """Arguments outside the domain of an operation (bad endpoints, coverage, ordering)."""


class CapacityError(BlppError, RuntimeError):
    """Instance too large for an exhaustive or refinement-based engine."""
