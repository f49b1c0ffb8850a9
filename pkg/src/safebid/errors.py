"""Exception types shared across the engine modules."""


class SafebidError(Exception):
    """Base class for all engine errors."""


class DimensionMismatch(SafebidError):
    """A vector does not match the number of units."""


class InfeasibleDemand(SafebidError):
    """Demand cannot be met by the operating units under the active constraints."""


class NoFeasibleCompletion(SafebidError):
    """No current-step maintenance decision admits a feasible remaining schedule."""


class InstanceTooLarge(SafebidError):
    """Instance exceeds the size bound of an exhaustive oracle."""


class BadBigM(SafebidError):
    """The big-M constant is too small to dominate the state variable."""


class ShapeMismatch(SafebidError):
    """Network parameter or input shapes are inconsistent."""


class InsufficientSamples(SafebidError):
    """Replay buffer holds fewer items than the requested minibatch size."""


class BadBinning(SafebidError):
    """Discretization edges are not strictly increasing."""


class IndexOutOfRange(SafebidError):
    """State or action index outside the table."""


class BadBand(SafebidError):
    """Demand band exits the feasibility interval implied by the unit fleet."""


class ParseError(SafebidError):
    """Config file is syntactically invalid or contains unknown keys."""


class ValidationError(SafebidError):
    """Config parsed but violates structural invariants."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
