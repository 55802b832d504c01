"""Exception hierarchy shared across the solver modules."""


class EhbcError(Exception):
    """Base class for all solver errors."""


class InfeasibleRateError(EhbcError, ValueError):
    """A requested rate lies outside the region for the given power."""


class RateRangeError(EhbcError, ValueError):
    """Rate exponent r/kappa too large to evaluate without overflow."""


class InstanceError(EhbcError, ValueError):
    """Malformed or inconsistent problem instance."""


class InfeasibleInstanceError(EhbcError):
    """No finite completion time exists for the instance."""


class PairInfeasibleError(EhbcError):
    """A two-epoch local problem cannot deliver its bits with its energy."""


class NoCandidateError(EhbcError):
    """An active-constraint pattern admits no solution."""


class ConvergenceError(EhbcError):
    """An iterative routine hit its iteration cap."""


class SizeCapError(EhbcError):
    """Instance exceeds the size handled by the brute-force oracle."""
