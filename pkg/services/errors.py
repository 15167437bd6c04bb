from typing import Any, List, Optional


class HypTableError(Exception):
    """Base class for every error raised by the library"""


# Input errors

class HashNotInvertible(HypTableError):
    pass


class UnknownSymbol(HypTableError):
    pass


class MarkerInInput(HypTableError):
    pass


class UnsupportedBackend(HypTableError):
    pass


class NotFinite(HypTableError):
    pass


class NotCnf(HypTableError):
    pass


class EpsilonInLanguage(HypTableError):
    pass


class NotLinearNormalForm(HypTableError):
    pass


class NotATableWord(HypTableError):
    pass


class NotACycle(HypTableError):
    pass


class EndpointMismatch(HypTableError):
    pass


class NotInverseClosed(HypTableError):
    pass


class NotACombing(HypTableError):
    pass


class InvalidPair(HypTableError):
    pass


class RankInconsistent(HypTableError):
    pass


class ImageInconsistent(HypTableError):
    pass


# Configuration errors

class ConfigError(HypTableError):
    pass


class GroupFileError(ConfigError):
    pass


# Budget errors

class BudgetExceeded(HypTableError):
    def __init__(self, what: str, budget: int):
        super().__init__(f"{what} exceeded budget of {budget}")
        self.what = what
        self.budget = budget


class StateBudgetExceeded(BudgetExceeded):
    pass


class OutputBudgetExceeded(BudgetExceeded):
    pass


class SearchBudgetExceeded(BudgetExceeded):
    pass


class VerificationFailed(HypTableError):
    """Raised when a bounded check finds counterexamples"""

    def __init__(self, message: str, counterexamples: Optional[List[Any]] = None):
        super().__init__(message)
        self.counterexamples = sorted(counterexamples or [], key=str)
