"""Exception types shared across the package."""


class DpnlsError(Exception):
    """Base class for all package-specific failures."""


class InvalidParams(DpnlsError, ValueError):
    """Model parameters or configuration violate an admissibility constraint."""


class BracketFailure(DpnlsError):
    """Shooting bracket could not be made to straddle the ground-state amplitude."""


class StiffnessFailure(DpnlsError):
    """ODE integration broke down (step underflow or unusable trajectory)."""


class ProfileRejected(DpnlsError):
    """Computed profile failed a structural invariant (positivity/monotonicity)."""


class DivergentNorm(DpnlsError):
    """A requested norm provably diverges under the tail model (strict mode)."""


class NoRoot(DpnlsError):
    """Scalar root search found no sign change in the admissible range."""


class HypothesisViolated(DpnlsError):
    """A precondition of the scaling-root construction does not hold."""


class WindowNotFound(DpnlsError):
    """No radial window satisfied the tail stabilization criterion."""


class GridTooSmall(DpnlsError, ValueError):
    """Periodic box cannot hold the requested initial data."""


class NonFinite(DpnlsError):
    """Field became non-finite without crossing the blowup threshold."""


class InsufficientSamples(DpnlsError):
    """Diagnostics series too short for the requested consistency check."""


class IndeterminateCriterion(DpnlsError):
    """Instability criterion value below numerical resolution, sign undecidable."""
