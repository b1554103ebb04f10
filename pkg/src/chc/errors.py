"""Exception types raised across the package."""


class CHCError(Exception):
    """Base class; ``tag`` is the short machine-readable name used by the CLI."""

    tag = "CHCError"


class NonZeroMeanInput(CHCError, ValueError):
    tag = "NonZeroMeanInput"


class ShapeMismatch(CHCError, ValueError):
    tag = "ShapeMismatch"


class IndexOutOfRange(CHCError, IndexError):
    tag = "IndexOutOfRange"


class DomainViolation(CHCError, ValueError):
    tag = "DomainViolation"


class PotentialDomainViolation(DomainViolation):
    tag = "PotentialDomainViolation"


class NoConvergence(CHCError, RuntimeError):
    tag = "NoConvergence"


class NonFinite(CHCError, FloatingPointError):
    tag = "NonFinite"

    def __init__(self, msg, step=None):
        super().__init__(msg)
        self.step = step


class TrajectoryMismatch(CHCError, ValueError):
    tag = "TrajectoryMismatch"


class EmptyPathSet(CHCError, ValueError):
    tag = "EmptyPathSet"


class ConfigError(CHCError, ValueError):
    """Collects every violation found while validating a configuration."""

    tag = "ConfigError"

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
