"""Exception hierarchy shared by all modules."""


class EvdepError(Exception):
    """Base class for errors raised by this package."""


class ParameterError(EvdepError, ValueError):
    """Invalid model parameter or function argument."""


class NumericDomainError(EvdepError, ArithmeticError):
    """A non-finite value appeared where a finite one is required."""


class BracketError(EvdepError, ValueError):
    """Root-finding interval does not contain a sign change."""


class NoRootError(EvdepError):
    """Estimating equation has no root inside the expanded bracket."""


class TieError(EvdepError, ValueError):
    """Tied observations within a column (continuous margins assumed)."""


class InfeasibleThetaError(EvdepError):
    """Zero lies outside the convex hull of the estimating values."""


class EmptyIntervalError(EvdepError):
    """The likelihood-ratio superlevel set is empty."""
