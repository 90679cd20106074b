"""Exception hierarchy for lattice_tomo."""


class LatticeTomoError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(LatticeTomoError, ValueError):
    pass


class DecodeFailure(LatticeTomoError):
    """A detector could not produce a decision (e.g. rank-deficient channel for ZF)."""


class CapabilityError(LatticeTomoError):
    """The requested computation exceeds a configured capability guard."""


class ConfigError(LatticeTomoError, ValueError):
    """Invalid simulation configuration; ``field`` names the offending entry."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
