"""Exception types shared across the package.

Errors split into two families: contract violations (bad arguments,
unknown names) and numerical refusals (resource budgets, singular data
encountered mid-computation).  The CLI maps the former to exit code 2
and the latter to exit code 3.
"""


class OsclabError(Exception):
    """Base class for all package-specific errors."""


class ContractError(OsclabError, ValueError):
    """Caller violated a precondition or supplied malformed data."""


class NumericalError(OsclabError, ArithmeticError):
    """Computation refused or aborted for numerical reasons."""


# -- contract violations ------------------------------------------------

class OutOfDomain(ContractError):
    pass


class UnsupportedOrder(ContractError):
    pass


class UnknownName(ContractError, KeyError):
    pass


class EmptyInterval(ContractError):
    pass


class NonPositiveSupport(ContractError):
    pass


class MismatchedLambda(ContractError):
    pass


class NonSquareInverse(ContractError):
    pass


class LambdaTooSmall(ContractError):
    pass


class UnderSampled(ContractError):
    pass


class DegeneratePoints(ContractError):
    pass


# -- numerical refusals -------------------------------------------------

class BudgetExceeded(NumericalError):
    pass


class ResolutionTooLow(NumericalError):
    pass


class UnderResolved(NumericalError):
    pass


class DegenerateGradient(NumericalError):
    pass


class DegenerateMixedPartial(NumericalError):
    pass


class OdeSingularity(NumericalError):
    pass
