"""One-dimensional time evolution of the double-power NLS with diagnostics.

    i u_t + u_xx - |u|^(p-1) u + |u|^(q-1) u = 0

on a periodic box [-L, L) standing in for the line, advanced by Strang
splitting: a half-step of the pointwise phase rotation generated by the
nonlinearity, a full linear step applied exactly in Fourier space, and a
second half nonlinear step.  Both substeps preserve the L2 mass exactly, so
mass drift measures only roundoff; energy drift measures the splitting error
and drives the step-size halving near blowup.

Diagnostics track energy, mass, the virial functional P (whose double
integral controls the variance ||x u||^2), the variance itself in box
coordinates, the gradient norm (blowup detector), and the distance to the
standing-wave orbit modulo phase and translation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import (
    GridTooSmall,
    InsufficientSamples,
    InvalidParams,
    NonFinite,
)
from .groundstate import RadialProfile
from .model import ModelParams

FORMAT_VERSION = "1"


@dataclass(frozen=True)
class GridSpec:
    """Periodic grid x_j = -L + 2 L j / M, j = 0..M-1."""

    half_length: float
    points: int

    def __post_init__(self):
        m = self.points
        if m < 4 or (m & (m - 1)) != 0:
            raise InvalidParams(f"grid points must be a power of two >= 4, got {m}")
        if self.half_length <= 0:
            raise InvalidParams("grid half-length must be positive")

    @property
    def dx(self) -> float:
        return 2 * self.half_length / self.points

    @property
    def x(self) -> np.ndarray:
        return -self.half_length + self.dx * np.arange(self.points)

    @property
    def k(self) -> np.ndarray:
        return 2 * math.pi * np.fft.fftfreq(self.points, d=self.dx)


@dataclass
class WaveField:
    grid: GridSpec
    values: np.ndarray
    time: float = 0.0

    def copy(self) -> "WaveField":
        return WaveField(self.grid, self.values.copy(), self.time)


class InitialDataKind(Enum):
    AMPLITUDE_SCALED = "amplitude-scaled"          # lambda * phi
    L2_SCALED = "l2-scaled"                        # lambda^(1/2) phi(lambda x)
    CUTOFF_AMPLITUDE_SCALED = "cutoff-amplitude-scaled"
    CUTOFF_L2_SCALED = "cutoff-l2-scaled"


def smooth_cutoff(t):
    """C-infinity transition: 1 on [0, 1], 0 on [2, inf)."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    out[t <= 1] = 1.0
    mid = (t > 1) & (t < 2)
    if np.any(mid):
        s = t[mid]
        with np.errstate(over="ignore"):
            f_up = np.exp(-1.0 / (2.0 - s))
            f_dn = np.exp(-1.0 / (s - 1.0))
        out[mid] = f_up / (f_up + f_dn)
    return out


def _truncation_error_h1(profile: RadialProfile, half_length: float) -> float:
    """Relative H1 mass of the profile beyond the box edge."""
    rr = np.geomspace(half_length, 100 * half_length, 200)
    v = profile.evaluate(rr)
    dv = profile.evaluate_deriv(rr)
    tail_sq = 2 * np.trapezoid(v * v + dv * dv, rr)
    r_in = profile.r_grid[1:]
    vin, dvin = profile.values[1:], profile.derivs[1:]
    total_sq = 2 * np.trapezoid(vin * vin + dvin * dvin, r_in) + tail_sq
    return math.sqrt(tail_sq / total_sq)


def make_initial_data(kind: InitialDataKind | str, profile: RadialProfile,
                      lam: float = 1.0, cutoff_radius: float | None = None,
                      grid: GridSpec | None = None) -> WaveField:
    """Sample scaled / cutoff variants of a radial profile on the line."""
    kind = InitialDataKind(kind)
    if profile.params.dim != 1:
        raise InvalidParams("evolution initial data requires a one-dimensional profile")
    if lam <= 0:
        raise InvalidParams("scaling factor must be positive")
    if grid is None:
        raise InvalidParams("a GridSpec is required")
    renormalize = kind is InitialDataKind.L2_SCALED
    cut = kind in (InitialDataKind.CUTOFF_AMPLITUDE_SCALED, InitialDataKind.CUTOFF_L2_SCALED)
    if cut:
        if cutoff_radius is None or cutoff_radius <= 0:
            raise InvalidParams("cutoff kinds require a positive cutoff radius")
        if 2 * cutoff_radius > 0.8 * grid.half_length:
            raise GridTooSmall(
                f"cutoff support 2R = {2 * cutoff_radius:g} exceeds 80% of the "
                f"box half-length {grid.half_length:g}"
            )
    else:
        trunc = _truncation_error_h1(profile, grid.half_length)
        if trunc > 1e-6:
            raise GridTooSmall(
                f"box truncation error {trunc:.2e} in H1 exceeds 1e-6; enlarge the "
                "box or use a cutoff initial-data kind"
            )
    x = grid.x
    r = np.abs(x)
    if kind in (InitialDataKind.L2_SCALED, InitialDataKind.CUTOFF_L2_SCALED):
        u = math.sqrt(lam) * profile.evaluate(lam * r)
    else:
        u = lam * profile.evaluate(r)
    if cut:
        u = u * smooth_cutoff(r / cutoff_radius)
    if renormalize and lam != 1.0:
        # the width scaling is mass-invariant in the continuum; enforce the
        # invariance on the lattice so it is exact rather than limited by
        # the profile-sampling error
        base = profile.evaluate(r)
        factor = math.sqrt(float(np.sum(base * base) / np.sum(u * u)))
        u = factor * u
    return WaveField(grid=grid, values=u.astype(np.complex128), time=0.0)


# ---------------------------------------------------------------------------
# spectral norms and functionals of line fields
# ---------------------------------------------------------------------------


def _spectral(field: WaveField):
    uh = np.fft.fft(field.values)
    return uh, field.grid.k


def field_mass(field: WaveField) -> float:
    return float(np.sum(np.abs(field.values) ** 2) * field.grid.dx)


def field_grad_norm_sq(field: WaveField) -> float:
    uh, k = _spectral(field)
    m = field.grid.points
    return float(np.sum(k**2 * np.abs(uh) ** 2) * field.grid.dx / m)


def field_power_integral(field: WaveField, power: float) -> float:
    return float(np.sum(np.abs(field.values) ** power) * field.grid.dx)


def field_energy(field: WaveField, params: ModelParams, linear_only: bool = False) -> float:
    e = 0.5 * field_grad_norm_sq(field)
    if not linear_only:
        e += field_power_integral(field, params.p + 1) / (params.p + 1)
        e -= field_power_integral(field, params.q + 1) / (params.q + 1)
    return e


def field_virial(field: WaveField, params: ModelParams, linear_only: bool = False) -> float:
    """P(u); reduces to the gradient term alone when the nonlinearity is off."""
    p_val = field_grad_norm_sq(field)
    if not linear_only:
        p_val += params.alpha / (params.p + 1) * field_power_integral(field, params.p + 1)
        p_val -= params.beta / (params.q + 1) * field_power_integral(field, params.q + 1)
    return p_val


def field_variance(field: WaveField) -> float:
    """||x u||^2 in box coordinates (meaningful while boundary mass is tiny)."""
    x = field.grid.x
    return float(np.sum(x**2 * np.abs(field.values) ** 2) * field.grid.dx)


def boundary_mass_fraction(field: WaveField) -> float:
    x = field.grid.x
    outer = np.abs(x) > 0.95 * field.grid.half_length
    total = np.sum(np.abs(field.values) ** 2)
    if total == 0:
        return 0.0
    return float(np.sum(np.abs(field.values[outer]) ** 2) / total)


def field_h1_sq(field: WaveField) -> float:
    return field_mass(field) + field_grad_norm_sq(field)


def sample_profile(profile: RadialProfile, grid: GridSpec) -> np.ndarray:
    return profile.evaluate(np.abs(grid.x)).astype(np.complex128)


def orbital_distance(field: WaveField, reference: np.ndarray,
                     return_details: bool = False):
    """H1 distance to the orbit {e^(i theta) ref(. - y)} of a sampled profile.

    Shifts are resolved on the grid (circular, spacing dx); the phase optimum
    is closed-form per shift via the H1 cross-correlation.
    """
    u = field.values
    g = field.grid
    uh = np.fft.fft(u)
    vh = np.fft.fft(reference)
    weight = 1.0 + g.k**2
    corr = np.fft.ifft(weight * uh * np.conj(vh)) * g.dx
    m_best = int(np.argmax(np.abs(corr)))
    theta = float(np.angle(corr[m_best]))
    # evaluate the difference directly at the optimum: no cancellation floor
    diff_h = uh - np.exp(1j * theta) * np.fft.fft(np.roll(reference, m_best))
    dist = math.sqrt(float(np.sum(weight * np.abs(diff_h) ** 2) * g.dx / g.points))
    if return_details:
        return dist, m_best * g.dx, theta
    return dist


# ---------------------------------------------------------------------------
# Strang stepping
# ---------------------------------------------------------------------------


def _abs_power(a: np.ndarray, e: float) -> np.ndarray:
    """|u|^e with multiply chains for small integer / half-integer e."""
    if e == 0.0:
        return np.ones_like(a)
    twice = 2.0 * e
    if twice == int(twice) and 0 < twice <= 12:
        n = int(twice)
        base = np.sqrt(a) if n % 2 else a
        half = n // 2
        out = base if n % 2 else np.ones_like(a)
        power_of_a = a
        while half:
            if half & 1:
                out = out * power_of_a
            power_of_a = power_of_a * power_of_a
            half >>= 1
        return out
    return a**e


def _nonlinear_phase(u, params: ModelParams, tau: float):
    a = np.abs(u)
    phase = tau * (_abs_power(a, params.q - 1) - _abs_power(a, params.p - 1))
    return u * np.exp(1j * phase)


@dataclass
class EvolutionDiagnostics:
    t: np.ndarray = field(default_factory=lambda: np.empty(0))
    energy: np.ndarray = field(default_factory=lambda: np.empty(0))
    mass: np.ndarray = field(default_factory=lambda: np.empty(0))
    virial_P: np.ndarray = field(default_factory=lambda: np.empty(0))
    variance: np.ndarray = field(default_factory=lambda: np.empty(0))
    grad_norm: np.ndarray = field(default_factory=lambda: np.empty(0))
    distance: np.ndarray = field(default_factory=lambda: np.empty(0))
    boundary_fraction: np.ndarray = field(default_factory=lambda: np.empty(0))
    blowup_flag: bool = False
    blowup_time: float | None = None
    blowup_reason: str = ""
    dt_final: float = 0.0
    shift_resolution: float = 0.0

    def to_csv(self, path):
        cols = ("t", "energy", "mass", "virial_P", "variance",
                "grad_norm", "distance", "boundary_fraction")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(cols) + ",blowup_flag\n")
            flag = 1 if self.blowup_flag else 0
            for i in range(self.t.size):
                row = ",".join(f"{getattr(self, c)[i]:.16e}" for c in cols)
                fh.write(f"{row},{flag if i == self.t.size - 1 else 0}\n")


class _DiagCollector:
    """Appends one diagnostics row per call, sharing a single FFT pass."""

    def __init__(self, grid: GridSpec, params: ModelParams, reference, linear_only):
        self.rows = {name: [] for name in
                     ("t", "energy", "mass", "virial_P", "variance",
                      "grad_norm", "distance", "boundary_fraction")}
        self.grid = grid
        self.params = params
        self.reference = reference
        self.linear_only = linear_only
        self.k_sq = grid.k**2
        self.x_sq = grid.x**2
        self.outer = np.abs(grid.x) > 0.95 * grid.half_length

    def append(self, t, u, uh=None):
        g, params = self.grid, self.params
        if uh is None:
            uh = np.fft.fft(u)
        a_sq = u.real**2 + u.imag**2
        mass = float(np.sum(a_sq) * g.dx)
        grad_sq = float(np.sum(self.k_sq * (uh.real**2 + uh.imag**2))
                        * g.dx / g.points)
        energy = 0.5 * grad_sq
        p_val = grad_sq
        if not self.linear_only:
            a = np.sqrt(a_sq)
            ip1 = float(np.sum(_abs_power(a, params.p + 1)) * g.dx)
            iq1 = float(np.sum(_abs_power(a, params.q + 1)) * g.dx)
            energy += ip1 / (params.p + 1) - iq1 / (params.q + 1)
            p_val += params.alpha / (params.p + 1) * ip1 \
                - params.beta / (params.q + 1) * iq1
        r = self.rows
        r["t"].append(t)
        r["energy"].append(energy)
        r["mass"].append(mass)
        r["virial_P"].append(p_val)
        r["variance"].append(float(np.sum(self.x_sq * a_sq) * g.dx))
        r["grad_norm"].append(math.sqrt(grad_sq))
        if self.reference is not None:
            r["distance"].append(
                orbital_distance(WaveField(g, u, t), self.reference)
            )
        else:
            r["distance"].append(math.nan)
        total = float(np.sum(a_sq))
        r["boundary_fraction"].append(
            float(np.sum(a_sq[self.outer]) / total) if total else 0.0
        )

    def finalize(self, **kw) -> EvolutionDiagnostics:
        return EvolutionDiagnostics(
            **{name: np.asarray(vals) for name, vals in self.rows.items()}, **kw
        )


def evolve(field_: WaveField, params: ModelParams, dt: float, t_end: float,
           diagnostics_every: int = 10, reference: np.ndarray | None = None,
           energy_jump_rtol: float = 1e-9, dt_floor: float = 1e-12,
           blowup_grad_factor: float = 1e3, linear_only: bool = False,
           stop_when_distance_exceeds: float | None = None,
           ) -> tuple[WaveField, EvolutionDiagnostics]:
    """Advance the field to t_end (forward or backward) by Strang splitting.

    The step halves (with retry) whenever a single step moves the conserved
    energy by more than energy_jump_rtol relative; underflow of dt or the
    gradient norm crossing blowup_grad_factor times its initial value ends
    the run gracefully with the blowup flag set.
    """
    if dt <= 0:
        raise InvalidParams("dt must be positive")
    if params.dim != 1:
        raise InvalidParams("evolution is one-dimensional")
    u = field_.values.copy()
    if not np.all(np.isfinite(u.view(float))):
        raise NonFinite("initial data is not finite")
    t = field_.time
    direction = 1.0 if t_end >= t else -1.0
    span = abs(t_end - t)
    g = field_.grid
    k_sq = g.k**2
    pe, qe = params.p + 1, params.q + 1

    def energy_and_grad(uh_new, a_new):
        grad_sq = float(np.sum(k_sq * (uh_new.real**2 + uh_new.imag**2))
                        * g.dx / g.points)
        e = 0.5 * grad_sq
        if not linear_only:
            e += float(np.sum(_abs_power(a_new, pe)) * g.dx) / pe
            e -= float(np.sum(_abs_power(a_new, qe)) * g.dx) / qe
        return e, grad_sq

    grad0 = math.sqrt(field_grad_norm_sq(field_))
    e_prev = field_energy(field_, params, linear_only)
    e_scale = abs(e_prev) + 1.0

    diag = _DiagCollector(g, params, reference, linear_only)
    diag.append(t, u)

    blowup_flag = False
    blowup_time = None
    reason = ""
    elapsed = 0.0
    steps = 0
    lin_phase = None
    dt_of_phase = math.nan
    dt_initial = dt
    calm_streak = 0
    while True:
        remaining = span - elapsed
        if remaining <= span * 1e-12:
            break
        dt_step = min(dt, remaining)
        tau = direction * dt_step
        if dt_step != dt_of_phase:
            lin_phase = np.exp(-1j * k_sq * tau)
            dt_of_phase = dt_step
        if linear_only:
            u_try = np.fft.ifft(lin_phase * np.fft.fft(u))
        else:
            u_half = _nonlinear_phase(u, params, tau / 2)
            u_lin = np.fft.ifft(lin_phase * np.fft.fft(u_half))
            u_try = _nonlinear_phase(u_lin, params, tau / 2)
        uh_try = np.fft.fft(u_try)
        a_try = np.abs(u_try)
        finite = bool(np.all(np.isfinite(a_try)))
        e_try, grad_sq_try = energy_and_grad(uh_try, a_try) if finite else (math.inf, 0.0)
        if not finite or abs(e_try - e_prev) > energy_jump_rtol * e_scale:
            if dt / 2 < dt_floor:
                grad_now = math.sqrt(field_grad_norm_sq(WaveField(g, u, t)))
                if grad_now >= blowup_grad_factor * grad0:
                    reason = "gradient-threshold"
                elif finite:
                    reason = "dt-underflow"
                else:
                    raise NonFinite(
                        "field lost finiteness at the dt floor without crossing "
                        "the gradient threshold"
                    )
                blowup_flag = True
                blowup_time = t
                break
            dt = dt / 2
            dt_of_phase = math.nan
            calm_streak = 0
            continue
        u = u_try
        t += tau
        elapsed += dt_step
        steps += 1
        # let dt recover after a calm stretch so one transient cannot pin the
        # whole run at a tiny step
        if dt < dt_initial and abs(e_try - e_prev) < 0.1 * energy_jump_rtol * e_scale:
            calm_streak += 1
            if calm_streak >= 16:
                dt = min(2 * dt, dt_initial)
                dt_of_phase = math.nan
                calm_streak = 0
        else:
            calm_streak = 0
        e_prev = e_try
        hit_threshold = math.sqrt(grad_sq_try) >= blowup_grad_factor * grad0
        landed = span - elapsed <= span * 1e-12
        if steps % diagnostics_every == 0 or landed or hit_threshold:
            diag.append(t, u, uh_try)
            if hit_threshold:
                blowup_flag = True
                blowup_time = t
                reason = "gradient-threshold"
                break
            if (stop_when_distance_exceeds is not None
                    and diag.rows["distance"][-1] > stop_when_distance_exceeds):
                break
    final = WaveField(g, u, t)
    if diag.rows["t"][-1] != t:
        diag.append(t, u)
    diagnostics = diag.finalize(
        blowup_flag=blowup_flag,
        blowup_time=blowup_time,
        blowup_reason=reason,
        dt_final=dt,
        shift_resolution=g.dx,
    )
    return final, diagnostics


# ---------------------------------------------------------------------------
# diagnostics consistency
# ---------------------------------------------------------------------------


def second_difference(t: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Nonuniform three-point second derivative at interior samples."""
    t0, t1, t2 = t[:-2], t[1:-1], t[2:]
    h0, h1 = t1 - t0, t2 - t1
    return 2 * (v[:-2] / (h0 * (h0 + h1)) - v[1:-1] / (h0 * h1) + v[2:] / (h1 * (h0 + h1)))


def virial_consistency(diag: EvolutionDiagnostics) -> float:
    """Max relative discrepancy between the sampled d^2/dt^2 of the variance
    and 8 P(u(t)) at interior samples."""
    if diag.t.size < 5:
        raise InsufficientSamples("need at least 5 diagnostic samples")
    vdd = second_difference(diag.t, diag.variance)
    target = 8 * diag.virial_P[1:-1]
    scale = max(float(np.max(np.abs(target))), 1e-6 * (1 + float(diag.grad_norm[0]) ** 2))
    return float(np.max(np.abs(vdd - target)) / scale)


# ---------------------------------------------------------------------------
# escape experiment for the small-frequency instability
# ---------------------------------------------------------------------------


@dataclass
class EscapeReport:
    params: ModelParams
    lam: float
    cutoff_radius: float
    initial_distance: float
    max_distance: float
    escape_observed: bool
    escape_time: float | None
    min_neg_virial_in_tube: float     # min of -P(u(t)) while in-tube
    b_member: bool
    b_margin_s: float
    b_margin_p: float
    t_samples: np.ndarray
    distance_samples: np.ndarray
    notes: str = ""

    def as_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "params": {"dim": self.params.dim, "p": self.params.p,
                       "q": self.params.q, "omega": self.params.omega},
            "lam": self.lam,
            "cutoff_radius": self.cutoff_radius,
            "initial_distance": self.initial_distance,
            "max_distance": self.max_distance,
            "escape_observed": self.escape_observed,
            "escape_time": self.escape_time,
            "min_neg_virial_in_tube": self.min_neg_virial_in_tube,
            "b_member": self.b_member,
            "b_margin_s": self.b_margin_s,
            "b_margin_p": self.b_margin_p,
            "notes": self.notes,
        }


def instability_escape_test(params: ModelParams, lam: float, t_end: float,
                            profile: RadialProfile | None = None,
                            escape_factor: float = 3.0,
                            grid: GridSpec | None = None,
                            cutoff_radius: float | None = None,
                            dt: float = 1e-3,
                            diagnostics_every: int = 50,
                            energy_jump_rtol: float = 1e-8) -> EscapeReport:
    """Evolve cutoff L2-scaled data and report orbital-distance growth.

    The cutoff radius is raised along a geometric ladder until the data lands
    in the blowup-adapted set {S < mu(omega), P < 0} (membership is reported,
    not assumed).  The distance ratio uses a floor on the initial distance so
    a control run (lam = 1) is not judged against pure roundoff.
    """
    from .functionals import compute_report
    from .model import RegimeTag, classify_regime
    from .stability import b_omega_verdict

    regime = classify_regime(params)
    if regime.tag is not RegimeTag.UNSTABLE_SMALL_OMEGA:
        raise InvalidParams(
            f"escape test requires the small-frequency unstable regime, got {regime.tag.value}"
        )
    if profile is None:
        from .groundstate import solve_ground_state

        profile = solve_ground_state(params)
    mu_omega = compute_report(profile).S
    if grid is None:
        grid = GridSpec(half_length=224.0, points=4096)

    ladder = [cutoff_radius] if cutoff_radius else [40.0, 60.0, 80.0]
    verdict = None
    data = None
    radius = ladder[-1]
    for radius in ladder:
        data = make_initial_data(InitialDataKind.CUTOFF_L2_SCALED, profile,
                                 lam=lam, cutoff_radius=radius, grid=grid)
        rep = _line_field_report(data, params)
        verdict = b_omega_verdict(rep, mu_omega)
        if verdict.member or lam == 1.0:
            break

    reference = sample_profile(profile, grid)
    d0 = orbital_distance(data, reference)
    floor = 1e-6 * math.sqrt(float(np.sum((1 + grid.k**2) *
                                          np.abs(np.fft.fft(reference)) ** 2)
                                   * grid.dx / grid.points))
    denom = max(d0, floor)
    _, diag = evolve(data, params, dt=dt, t_end=t_end,
                     diagnostics_every=diagnostics_every, reference=reference,
                     energy_jump_rtol=energy_jump_rtol,
                     stop_when_distance_exceeds=escape_factor * denom)
    dist = diag.distance
    threshold = escape_factor * denom
    exceeded = np.nonzero(dist > threshold)[0]
    escape_time = float(diag.t[exceeded[0]]) if exceeded.size else None
    in_tube = dist <= threshold
    neg_p = -diag.virial_P[in_tube]
    return EscapeReport(
        params=params,
        lam=lam,
        cutoff_radius=radius,
        initial_distance=d0,
        max_distance=float(dist.max()),
        escape_observed=bool(exceeded.size),
        escape_time=escape_time,
        min_neg_virial_in_tube=float(neg_p.min()) if neg_p.size else math.nan,
        b_member=bool(verdict.member),
        b_margin_s=verdict.margin_s,
        b_margin_p=verdict.margin_p,
        t_samples=diag.t,
        distance_samples=dist,
        notes=f"distance ratio floor {floor:.3e}; shift resolution {grid.dx:.3e}",
    )


def _line_field_report(field_: WaveField, params: ModelParams):
    """FunctionalReport-shaped view of a sampled line field (N = 1 norms)."""
    from .functionals import FunctionalReport, functionals_from_norms

    l2 = field_mass(field_)
    grad = field_grad_norm_sq(field_)
    lp1 = field_power_integral(field_, params.p + 1)
    lq1 = field_power_integral(field_, params.q + 1)
    S, K, J, P = functionals_from_norms(params, l2, grad, lp1, lq1)
    return FunctionalReport(
        params=params, L2_sq=l2, gradL2_sq=grad, Lp1=lp1, Lq1=lq1,
        S=S, K=K, J=J, P=P,
        pohozaev_residual_K=abs(K) / grad,
        pohozaev_residual_P=abs(P) / grad,
    )
