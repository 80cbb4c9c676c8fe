"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid configuration (bad distribution spec, impossible scheme sizes, ...)."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class ValidationError(ValueError):
    """Matrix or dimension precondition violated (non-Hermitian, non-PSD, shape mismatch)."""


class InfeasibleProblemError(RuntimeError):
    """The consumed-power cap cannot be met anywhere in the search interval."""
