"""Exception hierarchy.

Everything raised for a numerically unusable input derives from
:class:`NumericalPreconditionError`; the harness maps that family to exit
status 3.
"""


class NilquantError(Exception):
    pass


class NumericalPreconditionError(NilquantError, ValueError):
    """Input violates a resolution, support or calibration precondition."""


class GridMismatchError(NumericalPreconditionError):
    pass


class ResolutionError(NumericalPreconditionError):
    pass


class SupportOverflowError(NumericalPreconditionError):
    pass


class DegenerateInputError(NumericalPreconditionError):
    pass


class CalibrationError(NumericalPreconditionError):
    pass


class WeakLimitError(NumericalPreconditionError):
    """Family fails the weak-null probe test or shows cutoff dependence."""


class ConfigError(NilquantError, ValueError):
    pass
