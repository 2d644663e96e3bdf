"""Scaling-curvature instability machinery and blowup-set membership.

The L2-invariant width scaling v^lambda(x) = lambda^(N/2) v(lambda x) turns
the action into an explicit function of lambda through the four norms:

    S(v^lambda) = lambda^2/2 |grad v|^2 + omega/2 |v|^2
                  + lambda^alpha/(p+1) |v|_{p+1}^{p+1}
                  - lambda^beta/(q+1) |v|_{q+1}^{q+1},

so no re-quadrature is needed along the curve.  Its slope at lambda = 1 is
the virial functional P; a negative second derivative at lambda = 1 on the
ground state certifies orbital instability.  At omega = 0 both Pohozaev
identities eliminate the power norms and the second derivative collapses to
|grad v|^2 times a closed-form factor in (N, p, q) whose sign flips exactly
on the curve q = gamma_curve(N, p).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import IndeterminateCriterion
from .functionals import FunctionalReport, compute_report
from .groundstate import RadialProfile, ShootingConfig, solve_ground_state
from .model import ModelParams, gamma_curve


def action_of_width_scaling(report: FunctionalReport, lam) -> np.ndarray:
    """S(v^lambda) from the four norms; exact in lambda."""
    p = report.params
    lam = np.asarray(lam, dtype=float)
    return (
        lam**2 / 2 * report.gradL2_sq
        + p.omega / 2 * report.L2_sq
        + lam**p.alpha / (p.p + 1) * report.Lp1
        - lam**p.beta / (p.q + 1) * report.Lq1
    )


def virial_from_norms(report: FunctionalReport) -> float:
    p = report.params
    return (
        report.gradL2_sq
        + p.alpha / (p.p + 1) * report.Lp1
        - p.beta / (p.q + 1) * report.Lq1
    )


def second_deriv_closed_form(report: FunctionalReport) -> float:
    """d^2/dlambda^2 S(v^lambda) at lambda = 1, straight from the norms.

    The omega term is lambda-free, so the same expression serves every
    frequency.
    """
    p = report.params
    a, b = p.alpha, p.beta
    return (
        report.gradL2_sq
        + a * (a - 1) / (p.p + 1) * report.Lp1
        - b * (b - 1) / (p.q + 1) * report.Lq1
    )


def second_deriv_pohozaev_form(report: FunctionalReport) -> float:
    """The zero-frequency closed form with the power norms eliminated.

    Valid on solutions (both Pohozaev identities hold); depends only on
    |grad v|^2 and the exponents, making it independent of the power-norm
    quadratures that feed the finite-difference route.
    """
    p = report.params
    a, b = p.alpha, p.beta
    ap, bq = a / (p.p + 1), b / (p.q + 1)
    d = bq - ap
    bracket = 1 + (a * (a - 1) / (p.p + 1)) * (1 - bq) / d \
        - (b * (b - 1) / (p.q + 1)) * (1 - ap) / d
    return report.gradL2_sq * bracket


def _fd_second_deriv(report: FunctionalReport, h: float = 1e-3) -> float:
    """Fourth-order central difference of the scaling curve at lambda = 1."""
    lam = 1 + h * np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
    s = action_of_width_scaling(report, lam)
    return float((-s[4] + 16 * s[3] - 30 * s[2] + 16 * s[1] - s[0]) / (12 * h * h))


@dataclass
class ScalingCurve:
    """The action along the width scaling with derivatives at lambda = 1."""

    lambda_grid: np.ndarray
    S_values: np.ndarray
    first_deriv_at_1: float
    second_deriv_at_1: float          # finite difference of the norm formula
    closed_form_second_deriv: float


def scaling_curve(profile: RadialProfile, params: ModelParams | None = None,
                  lambda_grid=None) -> ScalingCurve:
    params = params or profile.params
    if lambda_grid is None:
        lambda_grid = np.linspace(0.5, 1.5, 101)
    lambda_grid = np.asarray(lambda_grid, dtype=float)
    if not (lambda_grid.min() < 1.0 < lambda_grid.max()):
        raise ValueError("lambda grid must contain a neighborhood of 1")
    report = compute_report(profile, params)
    if params.omega == 0:
        closed = second_deriv_pohozaev_form(report)
    else:
        closed = second_deriv_closed_form(report)
    return ScalingCurve(
        lambda_grid=lambda_grid,
        S_values=action_of_width_scaling(report, lambda_grid),
        first_deriv_at_1=virial_from_norms(report),
        second_deriv_at_1=_fd_second_deriv(report),
        closed_form_second_deriv=closed,
    )


def instability_criterion(profile: RadialProfile, params: ModelParams | None = None,
                          band_rtol: float = 1e-6, fd_rtol: float = 1e-4) -> bool:
    """True when the scaling curvature of the action at the ground state is
    negative beyond numerical resolution.  False only means "criterion not
    met", never "stable"."""
    params = params or profile.params
    curve = scaling_curve(profile, params)
    report = compute_report(profile, params)
    closed = curve.closed_form_second_deriv
    fd = curve.second_deriv_at_1
    band = band_rtol * report.gradL2_sq
    if abs(closed) <= band:
        raise IndeterminateCriterion(
            f"curvature {closed:.3e} within the resolution band {band:.3e}"
        )
    if abs(closed - fd) > fd_rtol * max(abs(closed), abs(fd)):
        raise IndeterminateCriterion(
            f"closed form {closed:.6e} and finite difference {fd:.6e} disagree "
            f"beyond {fd_rtol:g} relative"
        )
    return closed < 0


@dataclass
class SweepRow:
    p: float
    q: float
    gamma: float
    closed_form: float = float("nan")
    fd_value: float = float("nan")
    sign_closed_form: int = 0
    sign_gamma_test: int = 0
    agreement: bool = False
    near_degenerate: bool = False
    status: str = "ok"

    def as_dict(self) -> dict:
        return {
            "p": self.p,
            "q": self.q,
            "gamma": self.gamma,
            "closed_form": self.closed_form,
            "fd_value": self.fd_value,
            "sign_closed_form": self.sign_closed_form,
            "sign_gamma_test": self.sign_gamma_test,
            "agreement": self.agreement,
            "near_degenerate": self.near_degenerate,
            "status": self.status,
        }


def sign_equivalence_sweep(dim: int, pq_grid, cfg: ShootingConfig | None = None,
                           degenerate_band: float = 0.02) -> list[SweepRow]:
    """For each zero-frequency pair, compare the sign of the closed-form
    scaling curvature against the sign of q - gamma_curve(N, p)."""
    rows = []
    for p, q in pq_grid:
        gamma = gamma_curve(dim, p)
        row = SweepRow(p=p, q=q, gamma=gamma)
        row.near_degenerate = abs(q - gamma) < degenerate_band
        try:
            params = ModelParams(dim, p, q, 0.0)
            if q >= params.mass_critical_exponent:
                row.status = "inadmissible: q >= 1 + 4/N"
                rows.append(row)
                continue
            prof = solve_ground_state(params, cfg)
            report = compute_report(prof)
            row.closed_form = second_deriv_pohozaev_form(report)
            row.fd_value = _fd_second_deriv(report)
            row.sign_closed_form = int(np.sign(row.closed_form))
            row.sign_gamma_test = int(np.sign(q - gamma))
            # curvature < 0 should match q > gamma
            row.agreement = row.sign_closed_form == -row.sign_gamma_test
        except Exception as exc:
            row.status = f"error: {type(exc).__name__}: {exc}"
        rows.append(row)
    return rows


@dataclass
class BOmegaVerdict:
    """Membership test for the blowup-invariant set {S < mu, P < 0}."""

    s_lt_mu: bool
    p_negative: bool
    member: bool = field(init=False)
    margin_s: float = 0.0   # mu(omega) - S(v)
    margin_p: float = 0.0   # -P(v)

    def __post_init__(self):
        self.member = self.s_lt_mu and self.p_negative

    def as_dict(self) -> dict:
        return {
            "s_lt_mu": self.s_lt_mu,
            "p_negative": self.p_negative,
            "member": self.member,
            "margin_s": self.margin_s,
            "margin_p": self.margin_p,
        }


def b_omega_verdict(data: FunctionalReport, mu_omega: float) -> BOmegaVerdict:
    p_val = virial_from_norms(data)
    return BOmegaVerdict(
        s_lt_mu=bool(data.S < mu_omega),
        p_negative=bool(p_val < 0),
        margin_s=float(mu_omega - data.S),
        margin_p=float(-p_val),
    )
