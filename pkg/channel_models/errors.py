"""Exceptions shared by the channel models, the linear programs and the command line front end"""


class ConverseError(Exception):
    """Base class for every error raised by this package"""


class ChannelError(ConverseError, ValueError):
    """A channel matrix or channel file could not be accepted"""


class EmptyMatrix(ChannelError):
    """The channel matrix has no rows or no columns"""


class NegativeEntry(ChannelError):
    """A transition probability is negative"""

    def __init__(self, row: int, column: int, value: float):
        super().__init__(f"negative entry {value!r} at row {row}, column {column}")
        self.row = row
        self.column = column
        self.value = value


class RowSumMismatch(ChannelError):
    """A row of the channel matrix does not sum to one"""

    def __init__(self, row: int, deviation: float):
        super().__init__(f"row {row} sums to 1{deviation:+.3e}")
        self.row = row
        self.deviation = deviation


class BadParameter(ChannelError):
    """A standard channel was requested with parameters out of range"""


class ParseError(ChannelError):
    """A JSON document (channel, certificate, code) is malformed"""


class DimensionMismatch(ConverseError, ValueError):
    """Vector or matrix sizes do not agree with the channel or program"""


class DomainError(ConverseError, ValueError):
    """An argument lies outside the domain of a function"""


class ConfigError(ConverseError, ValueError):
    """The settings file has unknown sections, keys or bad values"""


class UsageError(ConverseError, ValueError):
    """Command line arguments do not form a valid request"""


class LimitExceeded(ConverseError):
    """A problem is larger than the configured limit"""


class SizeLimitExceeded(LimitExceeded):
    """An explicit tensor power would be too large, use the type-reduced programs instead"""


class SolverFailure(ConverseError, RuntimeError):
    """A linear program did not finish with an optimal solution"""


class NumericalBreakdown(SolverFailure):
    """Floating point pivoting lost accuracy, exact mode should be used instead"""


class IterationLimit(SolverFailure):
    """The simplex method reached its iteration limit"""


class NonConvergence(ConverseError, RuntimeError):
    """An iterative method stopped before reaching its tolerance"""


class InfeasibleWitness(ConverseError, ValueError):
    """A primal witness violates the constraints of its program

    Args:
        violations (list[str]): readable description of every violated constraint
    """

    def __init__(self, violations: list[str]):
        shown = "; ".join(violations[:5])
        more = f" (+{len(violations) - 5} more)" if len(violations) > 5 else ""
        super().__init__(f"infeasible witness: {shown}{more}")
        self.violations = violations
