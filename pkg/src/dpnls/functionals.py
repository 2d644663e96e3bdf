"""Variational functionals on radial profiles: norms, action, Nehari, virial.

All norms carry the radial surface weight omega_{N-1} r^(N-1) with
omega_{N-1} = 2 pi^(N/2) / Gamma(N/2) (equal to 2 on the line, counting both
half-lines).  Grid integrals use composite Simpson on the profile grid; the
analytic tail model supplies the remainder beyond r_max in closed form
(power-law tails) or incomplete-gamma form (exponential tails).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson
from scipy.optimize import brentq

from .errors import DivergentNorm, HypothesisViolated, NoRoot
from .groundstate import RadialProfile, ShootingConfig, solve_ground_state
from .model import ModelParams, l2_membership

FORMAT_VERSION = "1"


def sphere_area(dim: int) -> float:
    """Surface measure of the unit sphere S^(N-1); 2 for N = 1."""
    return 2 * math.pi ** (dim / 2) / math.gamma(dim / 2)


def radial_integral(r: np.ndarray, integrand: np.ndarray, dim: int) -> float:
    return sphere_area(dim) * float(simpson(integrand * r ** (dim - 1), x=r))


@dataclass
class FunctionalReport:
    """Norms and functional values of a profile at frequency omega."""

    params: ModelParams
    L2_sq: float
    gradL2_sq: float
    Lp1: float            # |v|^(p+1) integral
    Lq1: float            # |v|^(q+1) integral
    S: float              # action
    K: float              # Nehari functional
    J: float
    P: float              # virial functional
    pohozaev_residual_K: float
    pohozaev_residual_P: float
    l2_divergent: bool = False

    def as_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "params": {
                "dim": self.params.dim,
                "p": self.params.p,
                "q": self.params.q,
                "omega": self.params.omega,
            },
            "L2_sq": self.L2_sq,
            "gradL2_sq": self.gradL2_sq,
            "Lp1": self.Lp1,
            "Lq1": self.Lq1,
            "S": self.S,
            "K": self.K,
            "J": self.J,
            "P": self.P,
            "pohozaev_residual_K": self.pohozaev_residual_K,
            "pohozaev_residual_P": self.pohozaev_residual_P,
            "l2_divergent": self.l2_divergent,
        }


def profile_norms(profile: RadialProfile, params: ModelParams | None = None,
                  strict: bool = False):
    """(L2_sq, gradL2_sq, Lp1, Lq1, l2_divergent) with tail contributions."""
    params = params or profile.params
    n = params.dim
    r, v, dv = profile.r_grid, profile.values, profile.derivs

    tail = profile.tail
    t_l2, ok_l2 = tail.moment(2.0, n)
    t_grad, _ = tail.grad_moment(n)
    t_p1, ok_p1 = tail.moment(params.p + 1, n)
    t_q1, ok_q1 = tail.moment(params.q + 1, n)
    if not (ok_p1 and ok_q1):
        raise DivergentNorm("nonlinear-power norms diverge under the tail model")

    area = sphere_area(n)
    l2 = radial_integral(r, v * v, n) + area * t_l2
    grad = radial_integral(r, dv * dv, n) + area * t_grad
    lp1 = radial_integral(r, np.abs(v) ** (params.p + 1), n) + area * t_p1
    lq1 = radial_integral(r, np.abs(v) ** (params.q + 1), n) + area * t_q1
    divergent = not ok_l2
    if divergent and strict:
        raise DivergentNorm(
            "L2 norm diverges under the algebraic tail model "
            f"(dim={n}, p={params.p}); rerun without strict mode for the truncated value"
        )
    return l2, grad, lp1, lq1, divergent


def functionals_from_norms(params: ModelParams, l2, grad, lp1, lq1):
    """(S, K, J, P) assembled from the four norms."""
    p, q, w = params.p, params.q, params.omega
    L = grad + w * l2
    S = 0.5 * L + lp1 / (p + 1) - lq1 / (q + 1)
    K = L + lp1 - lq1
    J = (0.5 - 1 / (q + 1)) * L + (1 / (p + 1) - 1 / (q + 1)) * lp1
    P = grad + params.alpha / (p + 1) * lp1 - params.beta / (q + 1) * lq1
    return S, K, J, P


def compute_report(profile: RadialProfile, params: ModelParams | None = None,
                   strict: bool = False) -> FunctionalReport:
    params = params or profile.params
    l2, grad, lp1, lq1, divergent = profile_norms(profile, params, strict=strict)
    S, K, J, P = functionals_from_norms(params, l2, grad, lp1, lq1)
    return FunctionalReport(
        params=params,
        L2_sq=l2,
        gradL2_sq=grad,
        Lp1=lp1,
        Lq1=lq1,
        S=S,
        K=K,
        J=J,
        P=P,
        pohozaev_residual_K=abs(K) / grad,
        pohozaev_residual_P=abs(P) / grad,
        l2_divergent=divergent,
    )


# ---------------------------------------------------------------------------
# scalar rescalings
# ---------------------------------------------------------------------------


def nehari_rescale(profile: RadialProfile, params: ModelParams | None = None) -> float:
    """The amplitude factor lambda_1 > 0 with K(lambda_1 v) = 0.

    Dividing K(lambda v) by lambda^2 leaves A + B lambda^(p-1) - C lambda^(q-1)
    with positive A, B, C, which has a single positive root.
    """
    params = params or profile.params
    l2, grad, lp1, lq1, _ = profile_norms(profile, params)
    A = grad + params.omega * l2
    p, q = params.p, params.q

    def h(lam):
        return A + lam ** (p - 1) * lp1 - lam ** (q - 1) * lq1

    lo, hi = 1e-6, 1e6
    if h(lo) <= 0 or h(hi) >= 0:
        raise NoRoot("Nehari rescaling has no root in the search range [1e-6, 1e6]")
    return brentq(h, lo, hi, xtol=1e-12, rtol=8.9e-16)


def virial_scaling_root(profile: RadialProfile, params: ModelParams | None = None) -> float:
    """The width-scaling factor lambda_0 with K(v^lambda_0) = 0, where
    v^lambda(x) = lambda^(N/2) v(lambda x) preserves the L2 norm."""
    params = params or profile.params
    l2, grad, lp1, lq1, _ = profile_norms(profile, params)
    a, b = params.alpha, params.beta
    w = params.omega
    mass_critical = abs(params.q - params.mass_critical_exponent) <= 1e-12

    if mass_critical:
        _, _, _, P = functionals_from_norms(params, l2, grad, lp1, lq1)
        if P > 0:
            raise HypothesisViolated(
                "mass-critical scaling root requires P(v) <= 0, got P > 0"
            )

    def k(lam):
        return lam**2 * grad + w * l2 + lam**a * lp1 - lam**b * lq1

    grid = np.geomspace(1e-8, 1e8, 321)
    vals = np.array([k(x) for x in grid])
    sign_change = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
    if sign_change.size == 0:
        raise NoRoot("K(v^lambda) has no sign change on [1e-8, 1e8]")
    i = sign_change[0]
    return brentq(k, grid[i], grid[i + 1], xtol=1e-12, rtol=8.9e-16)


# ---------------------------------------------------------------------------
# d(omega) curve
# ---------------------------------------------------------------------------


@dataclass
class DCurve:
    """Minimal action d(omega) = S_omega(phi_omega) along a frequency grid."""

    omega_grid: np.ndarray
    d_values: np.ndarray
    mass_values: np.ndarray
    mass_divergent: list
    statuses: list = field(default_factory=list)
    monotone: bool = False
    positive: bool = False

    def as_rows(self):
        for i, w in enumerate(self.omega_grid):
            yield {
                "omega": float(w),
                "d": float(self.d_values[i]),
                "mass": float(self.mass_values[i]),
                "mass_divergent": bool(self.mass_divergent[i]),
                "status": self.statuses[i],
            }


def d_curve(omega_grid, params_template: ModelParams,
            cfg: ShootingConfig | None = None) -> DCurve:
    omega_grid = np.asarray(omega_grid, dtype=float)
    if omega_grid.size and np.any(np.diff(omega_grid) < 0):
        raise ValueError("omega grid must be sorted ascending")
    if omega_grid.size and omega_grid[0] < 0:
        raise ValueError("omega grid entries must be nonnegative")
    d_vals = np.full(omega_grid.shape, np.nan)
    masses = np.full(omega_grid.shape, np.nan)
    flags, statuses = [], []
    for i, w in enumerate(omega_grid):
        try:
            prof = solve_ground_state(params_template.with_omega(float(w)), cfg)
            rep = compute_report(prof)
            d_vals[i] = rep.S
            masses[i] = rep.L2_sq
            flags.append(rep.l2_divergent)
            statuses.append("ok")
        except Exception as exc:  # per-point failures recorded, not raised
            flags.append(False)
            statuses.append(f"error: {type(exc).__name__}: {exc}")
    finite = d_vals[~np.isnan(d_vals)]
    monotone = bool(finite.size >= 2 and np.all(np.diff(finite) > 0)) or finite.size < 2
    return DCurve(
        omega_grid=omega_grid,
        d_values=d_vals,
        mass_values=masses,
        mass_divergent=flags,
        statuses=statuses,
        monotone=monotone,
        positive=bool(np.all(finite > 0)),
    )


# ---------------------------------------------------------------------------
# radial sup bound
# ---------------------------------------------------------------------------


def strauss_bound_check(profile: RadialProfile, params: ModelParams | None = None) -> float:
    """Margin of the radial sup bound

        sup_r r^(2(N-1)/(p+3)) phi(r)
            <= [(p+3)/2]^(2/(p+3)) ||phi||_{L^{p+1}}^((p+1)/(p+3)) ||grad phi||^(2/(p+3)).

    The chain-rule factor (p+3)/2 on the right is required: without it the
    bound is violated by exact zero-frequency solitons.  Returns min over the
    grid of RHS - LHS.
    """
    params = params or profile.params
    _, grad, lp1, _, _ = profile_norms(profile, params)
    p, n = params.p, params.dim
    expo = 2 * (n - 1) / (p + 3)
    rhs = ((p + 3) / 2) ** (2 / (p + 3)) * lp1 ** (1 / (p + 3)) * grad ** (1 / (p + 3))
    r = profile.r_grid[profile.r_grid > 0]
    v = profile.values[profile.r_grid > 0]
    lhs = r**expo * v
    return float(rhs - lhs.max())
