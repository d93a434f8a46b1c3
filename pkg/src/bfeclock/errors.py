"""Exception types raised by the estimation and locking code."""


class BfeError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(BfeError, ValueError):
    """Invalid static configuration (grid sizes, schemes, config files)."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class PreconditionError(BfeError, ValueError):
    """An argument violates an operation's precondition."""


class DegenerateUpdateError(BfeError, ArithmeticError):
    """The likelihood annihilated the prior: posterior mass is zero."""


class RegridError(BfeError, ValueError):
    """Source and target intervals do not overlap."""


class InfeasibleBudgetError(BfeError, ValueError):
    """No growth ratio satisfies the requested time budget."""


class TraceFormatError(BfeError, ValueError):
    """A trace file does not follow the expected column schema."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line
