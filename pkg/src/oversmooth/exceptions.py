"""Exception hierarchy shared by all modules."""


class OversmoothError(Exception):
    """Base class for errors raised by this package."""


class InvalidParameterError(OversmoothError, ValueError):
    """One or more parameters violate their constraints.

    ``violations`` is a list of ``(field, constraint)`` pairs.
    """

    def __init__(self, violations):
        if isinstance(violations, tuple) and len(violations) == 2 and isinstance(violations[0], str):
            violations = [violations]
        self.violations = list(violations)
        msg = "; ".join(f"{name}: {why}" for name, why in self.violations)
        super().__init__(msg)

    @property
    def fields(self):
        return [name for name, _ in self.violations]


class SizeMismatchError(OversmoothError, ValueError):
    pass


class UnsupportedOrderError(OversmoothError, ValueError):
    pass


class UnsupportedPairError(OversmoothError, ValueError):
    pass


class UnsupportedPenaltyError(OversmoothError, ValueError):
    pass


class DegenerateFitError(OversmoothError, ValueError):
    pass


class NonpositiveCoefficientError(OversmoothError, ValueError):
    pass


class SingularSystemError(OversmoothError, ArithmeticError):
    pass


class NoBracketError(OversmoothError, RuntimeError):
    """The residual range cannot straddle the discrepancy window."""


class NonMonotoneError(OversmoothError, RuntimeError):
    """Residual failed to be nondecreasing in alpha during a search."""


class InsufficientDataError(OversmoothError, ValueError):
    pass
