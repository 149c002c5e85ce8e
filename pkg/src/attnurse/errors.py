"""Exception hierarchy shared by every module."""


class AttnurseError(Exception):
    """Base class for all errors raised by this package."""


class DimMismatch(AttnurseError, ValueError):
    pass


class AllZeroMap(AttnurseError, ValueError):
    pass


class FewerThanTwoMaps(AttnurseError, ValueError):
    pass


class FewerThanTwoEntities(AttnurseError, ValueError):
    pass


class NonPositiveEntry(AttnurseError, ValueError):
    pass


class ProbabilityOverflow(AttnurseError, ValueError):
    pass


class BadRange(AttnurseError, ValueError):
    pass


class DegenerateSchedule(AttnurseError, ValueError):
    pass


class OutOfRange(AttnurseError, IndexError):
    pass


class DegenerateVariance(AttnurseError, ValueError):
    pass


class EmptyTrajectory(AttnurseError, ValueError):
    pass


class NonFiniteGradient(AttnurseError, FloatingPointError):
    """Raised when a nursing gradient contains NaN or Inf; the trial is aborted."""


class FormatError(AttnurseError, ValueError):
    """Malformed ATNM file or CSV/JSON record."""


class ParseError(AttnurseError, ValueError):
    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class ValidationError(AttnurseError, ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(f"{p}: {m}" for p, m in self.violations))
