"""Exception types shared across the package."""


class McnPowerError(Exception):
    """Base class for all errors raised by this package."""


class GameSizeError(McnPowerError):
    """Game exceeds an enumeration cap or the 64-agent mask width."""


class ZeroTotalWeightError(McnPowerError):
    """Total rule weight is zero, so weight-normalized indices are undefined."""


class RuleSetValidationError(McnPowerError):
    """A rule set violates its structural invariants."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class DataFormatError(McnPowerError):
    """An on-disk artifact is missing, truncated, corrupt, or has the wrong version."""


class TrainingDivergedError(McnPowerError):
    """Training hit a non-finite loss."""
