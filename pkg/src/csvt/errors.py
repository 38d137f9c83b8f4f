"""Exception types the CLI maps to exit codes."""


class ValidationError(ValueError):
    """Input violates a named invariant (exit code 2)."""


class CapError(ValueError):
    """Problem size exceeds a documented simulation cap (exit code 3)."""
