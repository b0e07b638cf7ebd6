"""Exception types shared across the package."""


class EoschedError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(EoschedError):
    """A scenario or CLI configuration value is invalid or inconsistent."""


class ParameterError(EoschedError):
    """An operation was called with an out-of-domain argument."""


class PlanFormatError(EoschedError):
    """A contact-plan file could not be parsed."""


class DimensionError(EoschedError):
    """Array dimensions do not match the configured network size."""


class ConsistencyError(EoschedError):
    """A recorded volume refers to an edge that does not exist."""


class ScheduleValidationError(EoschedError):
    """A slot decision violates a scheduling constraint."""


class OracleSizeError(EoschedError):
    """A brute-force oracle was asked to enumerate beyond its size cap."""
