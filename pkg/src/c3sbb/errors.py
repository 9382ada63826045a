"""Exceptions raised across the package."""


class C3Error(Exception):
    """Base class for all package errors."""


class DivisionByZero(C3Error, ZeroDivisionError):
    pass


class UnboundVariable(C3Error, KeyError):
    pass


class UnboundedVariable(C3Error, ValueError):
    """An original variable has an infinite bound."""


class ZeroDenominatorRange(C3Error, ValueError):
    """A denominator's interval contains zero."""


class NumericalFailure(C3Error, RuntimeError):
    """The LP solver hit its pivot limit or lost feasibility numerically."""


class EmptyList(C3Error, IndexError):
    pass


class DegenerateBox(C3Error, RuntimeError):
    """Branching was requested on a box that cannot be split further."""


class InvalidTree(C3Error, ValueError):
    pass


class InfeasibleGamma(C3Error, ValueError):
    """The QoI threshold exceeds the data the leaves can deliver."""


class InfeasibleDecision(C3Error, ValueError):
    def __init__(self, constraint, detail=""):
        self.constraint = constraint
        msg = f"decision violates {constraint}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class BudgetExceeded(C3Error, RuntimeError):
    def __init__(self, required, budget):
        self.required = required
        self.budget = budget
        super().__init__(
            f"brute force needs {required} evaluations, budget is {budget}")


class ScenarioError(C3Error, ValueError):
    """Malformed or invalid scenario file."""
