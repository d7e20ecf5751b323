"""Exception types raised by the library."""


class Et14Error(Exception):
    """Base class for all library errors."""


class SingularX1(Et14Error):
    """|lambda_ppll| (= X1) is below the configured threshold for a division."""


class ArityMismatch(Et14Error):
    """A scalar function's arguments do not match what the caller supplies."""


class FormMismatch(ArityMismatch):
    """A closure definition is inconsistent with its declared form."""


class RetriesExhausted(Et14Error):
    """Rejection sampling did not find an acceptable state within the cap."""


class NotStateC(Et14Error):
    """The state does not have the isotropic comparison-state pattern."""


class NearSingular(SingularX1):
    """Second derivatives requested too close to lambda_ppll = 0."""


class LimitNotConverged(Et14Error):
    """Richardson extrapolants of a one-sided limit disagree beyond tolerance."""


class NotIndefinite(Et14Error):
    """A counterexample direction was requested for a non-indefinite matrix."""


class InconsistentScalars(Et14Error):
    """Scalar invariants do not come from any real tensor configuration."""


class SingularJacobian(Et14Error):
    """Newton iteration hit a (numerically) singular Jacobian."""


class NoConvergence(Et14Error):
    """Newton iteration did not converge within the iteration cap."""


class SingularDenominator(Et14Error):
    """A solved form needs a division by a quantity that vanishes."""
