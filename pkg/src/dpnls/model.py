"""Problem parameters, derived exponents, and the stability-regime classifier.

The equation under study is the focusing/defocusing double-power NLS

    i u_t + Delta u - |u|^(p-1) u + |u|^(q-1) u = 0,   1 < p < q < 2* - 1,

whose standing-wave profiles solve -Delta phi + omega phi + phi^p - phi^q = 0
with frequency omega >= 0.  This module holds the parameter container, the
closed-form instability boundary curve in the (p, q) plane, the L2-membership
rule for the zero-frequency ("zero mass") ground state, its far-field decay
law, and the regime classifier mapping (N, p, q, omega) to a verdict.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .errors import InvalidParams

# Default frequency thresholds for the classifier.  The small-omega
# instability is only proven for omega below some unquantified omega_0, and
# large-omega stability is cited, not proved here; both ends are configurable.
DEFAULT_OMEGA_SMALL = 0.1
DEFAULT_OMEGA_LARGE = 10.0


def critical_power(dim: int) -> float | None:
    """Upper admissible exponent 2* - 1, or None when unbounded (dim <= 2)."""
    if dim <= 2:
        return None
    return (dim + 2) / (dim - 2)


@dataclass(frozen=True)
class ModelParams:
    """Dimension, nonlinearity exponents, and standing-wave frequency."""

    dim: int
    p: float
    q: float
    omega: float = 0.0

    def __post_init__(self):
        if not isinstance(self.dim, int) or isinstance(self.dim, bool) or self.dim < 1:
            raise InvalidParams(f"dimension must be a positive integer, got {self.dim!r}")
        for name in ("p", "q", "omega"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise InvalidParams(f"{name} must be finite, got {v!r}")
        if self.p <= 1:
            raise InvalidParams(f"p must exceed 1, got p={self.p}")
        if self.q <= self.p:
            raise InvalidParams(f"q must exceed p (got p={self.p}, q={self.q})")
        top = critical_power(self.dim)
        if top is not None and self.q >= top:
            raise InvalidParams(
                f"q must stay below 2*-1 = {top:g} in dimension {self.dim}, got q={self.q}"
            )
        if self.omega < 0:
            raise InvalidParams(f"omega must be nonnegative, got {self.omega}")

    # -- derived exponents -------------------------------------------------

    @property
    def alpha(self) -> float:
        """Scaling weight N(p-1)/2 of the lower-power norm."""
        return self.dim * (self.p - 1) / 2

    @property
    def beta(self) -> float:
        """Scaling weight N(q-1)/2 of the upper-power norm."""
        return self.dim * (self.q - 1) / 2

    @property
    def p_star(self) -> float | None:
        """Decay-law threshold N/(N-2); None (unbounded) for dim <= 2."""
        if self.dim <= 2:
            return None
        return self.dim / (self.dim - 2)

    @property
    def mass_critical_exponent(self) -> float:
        """The L2-critical exponent 1 + 4/N."""
        return 1 + 4 / self.dim

    @property
    def rho(self) -> float:
        """Uniform algebraic decay exponent max{2/(p-1), N-2}."""
        return max(2 / (self.p - 1), float(self.dim - 2))

    def is_sobolev_critical_p(self, rtol: float = 1e-12) -> bool:
        """Whether p sits on the log-corrected decay branch p = p*."""
        ps = self.p_star
        if ps is None:
            return False
        return abs(self.p - ps) <= rtol * ps

    def with_omega(self, omega: float) -> "ModelParams":
        return ModelParams(self.dim, self.p, self.q, omega)


@dataclass(frozen=True)
class TailLaw:
    """Predicted far-field law phi ~ r^(-exponent) * (log r)^(-log_power)."""

    exponent: float
    log_power: float = 0.0


class RegimeTag(Enum):
    STRONGLY_UNSTABLE = "StronglyUnstable"
    UNSTABLE_SMALL_OMEGA = "UnstableSmallOmega"
    STABLE_LARGE_OMEGA_CITED = "StableLargeOmegaCited"
    UNKNOWN = "Unknown"


@dataclass(frozen=True)
class RegimeLabel:
    tag: RegimeTag
    citation: str = ""

    def __post_init__(self):
        if self.tag is not RegimeTag.UNKNOWN and not self.citation:
            raise InvalidParams("non-Unknown regime labels must carry a citation")


def gamma_curve(dim: int, p: float) -> float:
    """Boundary curve separating the sign of the second scaling derivative
    of the zero-frequency action: instability for small omega requires
    q > gamma_curve(N, p).  Strictly decreasing in p."""
    n = float(dim)
    denom = n * (n + 2 - (n - 2) * p)
    if denom <= 0:
        raise InvalidParams(
            f"gamma curve undefined: N(N+2-(N-2)p) = {denom:g} <= 0 for N={dim}, p={p}"
        )
    return (16 + n * n + 6 * n - p * n * (n + 2)) / denom


def p_threshold(dim: int) -> float:
    """Fixed point p_N of the boundary curve, where q = gamma_N(p) meets q = p."""
    n = float(dim)
    return (n + math.sqrt(2 * n) + 4) / (math.sqrt(n) * (math.sqrt(n) + math.sqrt(2)))


def l2_membership(dim: int, p: float) -> bool:
    """Whether the zero-frequency ground state has finite L2 mass."""
    if p <= 1:
        raise InvalidParams(f"p must exceed 1, got p={p}")
    if dim <= 3:
        return p < 1 + 4 / dim
    if dim == 4:
        return p <= 2.0
    return True


def expected_decay(params: ModelParams) -> TailLaw:
    """Far-field decay law of the zero-frequency ground state."""
    if params.omega != 0:
        raise InvalidParams("expected_decay applies to omega = 0 only")
    ps = params.p_star
    if ps is None:
        return TailLaw(2 / (params.p - 1), 0.0)
    n2 = float(params.dim - 2)
    if params.is_sobolev_critical_p():
        return TailLaw(n2, n2 / 2)
    if params.p < ps:
        return TailLaw(2 / (params.p - 1), 0.0)
    return TailLaw(n2, 0.0)


def classify_regime(
    params: ModelParams,
    omega_small: float = DEFAULT_OMEGA_SMALL,
    omega_large: float = DEFAULT_OMEGA_LARGE,
) -> RegimeLabel:
    """Map (N, p, q, omega) to a stability verdict, Unknown being first-class."""
    qc = params.mass_critical_exponent
    if params.q >= qc:
        return RegimeLabel(
            RegimeTag.STRONGLY_UNSTABLE,
            "strong instability via virial blowup: q >= 1 + 4/N "
            "(mass-critical or supercritical upper exponent), any omega >= 0",
        )
    if gamma_curve(params.dim, params.p) < params.q and params.omega <= omega_small:
        return RegimeLabel(
            RegimeTag.UNSTABLE_SMALL_OMEGA,
            "small-frequency instability: q < 1 + 4/N with q above "
            "gamma_curve(N, p), so the zero-frequency action has negative "
            f"scaling curvature; omega <= {omega_small:g}",
        )
    if params.omega >= omega_large:
        return RegimeLabel(
            RegimeTag.STABLE_LARGE_OMEGA_CITED,
            "large-frequency stability, cited from the subcritical pure-power "
            f"perturbation regime; omega >= {omega_large:g}",
        )
    return RegimeLabel(RegimeTag.UNKNOWN)
