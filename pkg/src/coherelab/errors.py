"""Exception types raised across coherelab."""


class CoherelabError(Exception):
    """Base class for all library errors."""


class DomainError(CoherelabError, ValueError):
    """An argument lies outside the domain of the operation."""


class RangeError(DomainError):
    """An index such as a sparsity level is outside the supported range."""


class ContractError(CoherelabError, ValueError):
    """Inputs violate a structural precondition (shape, normalization)."""


class MatrixParseError(CoherelabError, ValueError):
    """A matrix or vector file could not be parsed.

    ``row`` and ``col`` are 1-based; ``col`` is None for row-level problems.
    """

    def __init__(self, message, row=None, col=None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if col is not None:
            where.append(f"column {col}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.row = row
        self.col = col


class ConditionError(CoherelabError):
    """A sufficient condition required by a bound does not hold."""


class DegenerateBoundError(ConditionError):
    """The condition holds but the bound formula has a vanishing denominator."""


class NumericalError(CoherelabError, ArithmeticError):
    """A numerical routine failed (singular system, infeasible problem)."""
