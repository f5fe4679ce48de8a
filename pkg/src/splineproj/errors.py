"""Exception hierarchy.

Errors split into two families so the command line can map them onto exit
codes: configuration/usage problems (``ConfigError``) and numerical failures
(``NumericalError``).
"""


class SplineProjError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(SplineProjError, ValueError):
    """Invalid input: bad knots, indices, domains or parameters."""


class NumericalError(SplineProjError, ArithmeticError):
    """A computation could not be carried out reliably."""


class KnotError(ConfigError):
    """Base class for knot sequence validation failures."""


class MultiplicityViolation(KnotError):
    pass


class NotSorted(KnotError):
    pass


class TooFewKnots(KnotError):
    pass


class OutOfRange(KnotError):
    pass


class NotClamped(KnotError):
    pass


class KnotFileError(KnotError):
    """Malformed knot file."""


class IndexOutOfRange(ConfigError, IndexError):
    pass


class DomainViolation(ConfigError):
    pass


class EmptySet(ConfigError):
    pass


class EmptyCell(ConfigError):
    pass


class WindowTooSmall(ConfigError):
    pass


class DimensionTooLarge(ConfigError):
    pass


class NotPositiveDefinite(NumericalError):
    pass


class NonFiniteSample(NumericalError):
    pass


class DegenerateFit(NumericalError):
    pass
