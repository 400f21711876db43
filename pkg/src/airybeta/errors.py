"""Shared exception types."""


class ValidationError(ValueError):
    """An argument or configuration violates a documented precondition."""


class ResourceLimitError(RuntimeError):
    """A computation exceeded a declared complexity cap (degree, walk count, ...)."""
