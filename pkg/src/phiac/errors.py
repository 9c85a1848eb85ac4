"""Exception types shared across the toolkit."""


class PhiacError(Exception):
    """Base class for all toolkit errors."""


class ContractError(PhiacError, ValueError):
    """An argument violates a call contract (wrong dimension, bad value)."""


class ConfigurationError(PhiacError, ValueError):
    """A system, gain set or scenario is internally inconsistent."""


class NumericsError(PhiacError, RuntimeError):
    """A numerical evaluation produced non-finite or unusable values."""


class SingularityError(NumericsError):
    """A matrix that must be invertible is (numerically) singular."""


class DivergenceError(NumericsError):
    """A simulation left the finite range of the state space.

    Attributes:
        t: simulation time at which divergence was detected.
    """

    def __init__(self, message: str, t: float):
        super().__init__(message)
        self.t = t
