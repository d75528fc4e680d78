"""Exception hierarchy.

Budget and precondition failures map to CLI exit code 2; witnessed negatives are
returned as verdict values, never raised.
"""


class TreeRamseyError(Exception):
    """Base class for every error raised by this package."""


class BudgetExceeded(TreeRamseyError):
    """An exhaustive enumeration would exceed its configured budget."""


class BudgetExhausted(BudgetExceeded):
    """A backtracking search ran out of placements before deciding."""


class NoEmbedding(TreeRamseyError):
    """An exhaustive search proved that no embedding exists."""


class InvalidDegreeBound(TreeRamseyError, ValueError):
    pass


class CapExceeded(TreeRamseyError, ValueError):
    pass


class SplitNotFound(TreeRamseyError):
    pass


class InvalidBeta(TreeRamseyError, ValueError):
    pass


class PreconditionBroken(TreeRamseyError):
    pass


class CleaningDiverged(TreeRamseyError):
    pass


class NoCandidate(TreeRamseyError):
    pass


class GoodnessUnrecoverable(TreeRamseyError):
    pass


class HypothesisBroken(TreeRamseyError):
    pass


class SamplingExhausted(TreeRamseyError):
    pass


class InternalAssertion(TreeRamseyError):
    pass


class DensityTooLow(TreeRamseyError, ValueError):
    pass


class CapacityExhausted(TreeRamseyError):
    """Raised with the partial ledger attached as ``self.ledger``."""

    def __init__(self, message: str, ledger=None):
        super().__init__(message)
        self.ledger = ledger
