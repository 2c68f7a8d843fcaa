"""Exception types shared across the package."""


class QweylError(Exception):
    pass


class CoordinateMismatch(QweylError):
    """Operands live over incompatible variable sets or frames."""


class NotDivisible(QweylError):
    """An exact division failed (no quotient in the truncated ring)."""


class PrimeTwoUnsupported(QweylError):
    """The requested construction needs an odd prime."""


class EpsilonCapExceeded(QweylError):
    """An operation would need envelope terms beyond the configured cap."""


class RouteMismatch(QweylError):
    """Two independent computations of the same quantity disagree.

    This is a bug trap: it should never fire on valid input. When it does,
    the message carries both values.
    """


class AssemblyInconsistent(QweylError):
    """Local patches admit no common global section under the given constraints."""


class InvalidConfig(QweylError):
    """A job configuration failed validation."""
