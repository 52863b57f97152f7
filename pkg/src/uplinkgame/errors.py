"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input data violates a documented invariant (bad scenario field, infeasible
    power profile, inconsistent shapes)."""


class ScenarioParseError(ValidationError):
    """A scenario file could not be parsed; the message carries the location."""


class ResourceError(RuntimeError):
    """A configured resource cap was exceeded (enumeration size, memory entries)."""
