"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines and timings.
"""

import json
import math
import time

import numpy as np
import pytest
from scipy.optimize import brentq

import conftest
from conftest import FINE, ground_state
from dpnls import (
    ModelParams,
    compute_report,
    d_curve,
    evolve,
    fit_tail,
    gamma_curve,
    instability_escape_test,
    make_initial_data,
    p_threshold,
    sign_equivalence_sweep,
    strauss_bound_check,
    virial_consistency,
    zero_mass_limit_study,
)
from dpnls.cli import main as cli_main
from dpnls.evolution import GridSpec, InitialDataKind, second_difference
from dpnls.evolution import _line_field_report
from dpnls.groundstate import ShootingConfig
from dpnls.stability import b_omega_verdict


def _report(num, desc, ok, t0, budget):
    wall = time.time() - t0
    status = "PASS" if ok and wall < budget else "FAIL"
    print(f"[acceptance] criterion {num:2d} {status}: {desc} "
          f"({wall:.1f}s / budget {budget:.0f}s)")
    assert ok, f"criterion {num} failed: {desc}"
    assert wall < budget, f"criterion {num} exceeded runtime budget: {wall:.1f}s"


def first_integral_root(p, q, omega):
    def v(s):
        return omega * s * s / 2 + s ** (p + 1) / (p + 1) - s ** (q + 1) / (q + 1)

    def g(s):
        return omega + s ** (p - 1) - s ** (q - 1)

    s1 = brentq(g, 1e-8, 1e4) if omega > 0 else 1.0
    hi = 2 * s1
    while v(hi) > 0:
        hi *= 2
    return brentq(v, s1, hi, xtol=1e-14, rtol=8.9e-16)


def test_criterion_01_amplitude_oracle():
    t0 = time.time()
    rng = np.random.default_rng(20260809)
    cfg = ShootingConfig(bisect_rtol=1e-12)
    ok = True
    from dpnls import solve_ground_state

    for _ in range(10):
        p = float(rng.uniform(1.3, 3.5))
        q = float(rng.uniform(p + 0.4, p + 2.5))
        omega = float(rng.uniform(0.05, 1.0))
        prof = solve_ground_state(ModelParams(1, p, q, omega), cfg)
        oracle = first_integral_root(p, q, omega)
        ok = ok and abs(prof.amplitude - oracle) <= 1e-8
    _report(1, "N=1 shooting amplitude matches the first-integral root to 1e-8",
            ok, t0, 10.0)


PAIRS_C2 = [(2.0, 3.0), (2.2, 3.2), (2.5, 3.5)]


def test_criterion_02_pohozaev_suite():
    t0 = time.time()
    ok = True
    worst = 0.0
    for dim in (1, 2, 3):
        for (p, q) in PAIRS_C2:
            for omega in (0.0, 0.1, 1.0):
                rep = compute_report(ground_state(dim, p, q, omega))
                worst = max(worst, rep.pohozaev_residual_K, rep.pohozaev_residual_P)
                ok = ok and rep.pohozaev_residual_K <= 1e-6
                ok = ok and rep.pohozaev_residual_P <= 1e-6
    _report(2, f"|K| and |P| <= 1e-6 |grad phi|^2 on 27 ground states "
               f"(worst {worst:.1e})", ok, t0, 60.0)


def test_criterion_03_gamma_exactness():
    t0 = time.time()
    ok = abs(gamma_curve(1, 1.0) - 5.0) <= 1e-10
    ok = ok and abs(gamma_curve(1, 2.0) - 3.4) <= 1e-10
    ok = ok and abs(p_threshold(1) - (4 * math.sqrt(2) - 3)) <= 1e-10
    ok = ok and abs(p_threshold(2) - 2.0) <= 1e-10
    for dim in range(1, 6):
        pn = p_threshold(dim)
        ok = ok and abs(gamma_curve(dim, pn) - pn) <= 1e-10
    _report(3, "closed-form boundary values and fixed points exact to 1e-10",
            ok, t0, 5.0)


PAIRS_C4 = {
    1: [(2.0, 4.8), (2.0, 3.0), (3.0, 4.5), (2.5, 3.2), (1.5, 4.0),
        (3.5, 4.4), (2.2, 4.0)],
    2: [(1.5, 2.6), (2.0, 2.5), (1.8, 2.45), (2.2, 2.7), (1.6, 2.9),
        (2.4, 2.8), (1.3, 2.85)],
    3: [(1.5, 2.2), (1.8, 2.1), (2.0, 2.3), (1.6, 2.0), (1.3, 1.9),
        (2.1, 2.3), (1.4, 2.25)],
}


def test_criterion_04_sign_equivalence():
    t0 = time.time()
    total, ok = 0, True
    for dim, pairs in PAIRS_C4.items():
        rows = sign_equivalence_sweep(dim, pairs)
        for row in rows:
            assert row.status == "ok", f"N={dim} {row.p},{row.q}: {row.status}"
            if row.near_degenerate:
                continue
            total += 1
            ok = ok and row.agreement
            fd_rel = abs(row.closed_form - row.fd_value) / abs(row.fd_value)
            ok = ok and fd_rel <= 1e-4
    ok = ok and total >= 20
    _report(4, f"scaling-curvature sign matches sign(q - gamma) on {total} "
               "zero-frequency pairs, finite differences agree to 1e-4",
            ok, t0, 300.0)


def test_criterion_05_d_monotone():
    t0 = time.time()
    grid = np.round(np.arange(0.0, 1.01, 0.1), 10)
    ok = True
    for prm in (ModelParams(1, 2.0, 4.0, 0.0), ModelParams(1, 3.0, 5.0, 0.0),
                ModelParams(3, 2.0, 3.0, 0.0)):
        curve = d_curve(grid, prm)
        ok = ok and all(s == "ok" for s in curve.statuses)
        ok = ok and curve.monotone and curve.positive
        ok = ok and curve.d_values[0] > 0
    _report(5, "d(omega) strictly increasing on omega in {0,...,1} for three "
               "parameter sets, d(0) > 0", ok, t0, 120.0)


def test_criterion_06_zero_mass_limit():
    t0 = time.time()
    study = zero_mass_limit_study(ModelParams(1, 3.0, 5.0, 0.0),
                                  [0.5, 0.1, 0.02, 0.004])
    ok = all(s == "ok" for s in study.statuses)
    h1, lp1 = study.delta_H1dot, study.delta_Lp1
    ok = ok and np.all(np.diff(h1) < 0) and np.all(np.diff(lp1) < 0)
    ok = ok and h1[-1] < 0.05 and lp1[-1] < 0.05
    ok = ok and np.all(study.identity_residual <= 1e-6)
    ok = ok and np.all(np.diff(study.mass_times_omega) < 0)
    _report(6, f"phi_omega -> phi_0 in H1dot and L^(p+1) (final gaps "
               f"{h1[-1]:.3f}, {lp1[-1]:.3f}), Nehari identity to 1e-6, "
               "omega mass -> 0", ok, t0, 120.0)


def test_criterion_07_decay_fits():
    t0 = time.time()
    fit1 = fit_tail(ground_state(1, 3.0, 5.0, 0.0))
    ok = abs(fit1.fitted_exponent - 1.0) <= 0.02
    fit2 = fit_tail(ground_state(3, 3.5, 4.0, 0.0))
    ok = ok and abs(fit2.fitted_exponent - 1.0) <= 0.02
    fit3 = fit_tail(ground_state(1, 2.0, 3.0, 0.25))
    ok = ok and abs(fit3.fitted_exponent - 0.5) <= 0.01
    _report(7, f"decay fits within 2%: algebraic {fit1.fitted_exponent:.4f}, "
               f"{fit2.fitted_exponent:.4f}; exponential rate "
               f"{fit3.fitted_exponent:.4f} vs sqrt(omega)", ok, t0, 60.0)


def test_criterion_08_conservation_and_virial():
    t0 = time.time()
    params = ModelParams(1, 2.0, 3.0, 1.0)
    prof = ground_state(1, 2.0, 3.0, 1.0, **FINE)
    grid = GridSpec(80.0, 2048)
    data = make_initial_data(InitialDataKind.L2_SCALED, prof, lam=1.05, grid=grid)
    _, diag = evolve(data, params, dt=1e-4, t_end=5.0, diagnostics_every=10)
    e_drift = float(np.abs(diag.energy - diag.energy[0]).max()
                    / (abs(diag.energy[0]) + 1))
    m_drift = float(np.abs(diag.mass - diag.mass[0]).max() / diag.mass[0])
    vres = virial_consistency(diag)
    ok = (not diag.blowup_flag) and e_drift <= 1e-8 and m_drift <= 1e-10 \
        and vres <= 1e-3
    _report(8, f"to t=5: energy drift {e_drift:.1e} <= 1e-8, mass drift "
               f"{m_drift:.1e} <= 1e-10, virial residual {vres:.1e} <= 1e-3",
            ok, t0, 60.0)


def test_criterion_09_strong_instability_blowup():
    t0 = time.time()
    params = ModelParams(1, 2.0, 5.0, 1.0)
    prof = ground_state(1, 2.0, 5.0, 1.0, **FINE)
    mu = compute_report(prof).S
    grid = GridSpec(16.0, 32768)
    data = make_initial_data(InitialDataKind.AMPLITUDE_SCALED, prof,
                             lam=1.1, grid=grid)
    rep0 = _line_field_report(data, params)
    verdict = b_omega_verdict(rep0, mu)
    bound = 16 * (rep0.S - mu)
    _, diag = evolve(data, params, dt=2e-4, t_end=1.0, diagnostics_every=20,
                     energy_jump_rtol=1e-4)
    vdd = second_difference(diag.t, diag.variance)
    ok = verdict.member
    ok = ok and diag.blowup_flag and diag.blowup_reason == "gradient-threshold"
    ok = ok and diag.grad_norm[-1] >= 1e3 * diag.grad_norm[0]
    ok = ok and bool(np.all(vdd <= bound + 1e-3))
    _report(9, f"1.1 phi blowup flag at t={diag.blowup_time:.4f} with sampled "
               f"Vdd <= 16(S(u0)-mu)+1e-3 = {bound + 1e-3:.4f} throughout",
            ok, t0, 120.0)


def test_criterion_10_small_omega_escape():
    t0 = time.time()
    params = ModelParams(1, 2.0, 4.8, 0.01)
    prof = ground_state(1, 2.0, 4.8, 0.01, **FINE)
    esc = instability_escape_test(params, lam=1.01, t_end=2.5, profile=prof)
    ctrl = instability_escape_test(params, lam=1.0, t_end=2.5, profile=prof,
                                   cutoff_radius=esc.cutoff_radius)
    ok = esc.b_member and esc.escape_observed
    ok = ok and esc.min_neg_virial_in_tube > 0   # P(u(t)) < 0 while in-tube
    ok = ok and not ctrl.escape_observed
    _report(10, f"cutoff width-scaled data escapes 3x at t={esc.escape_time:.2f} "
                f"with P<0 in-tube; control stays (max ratio "
                f"{ctrl.max_distance / max(ctrl.initial_distance, 1e-300):.2f})",
            ok, t0, 300.0)


def test_criterion_11_strauss_bound():
    t0 = time.time()
    margins = []
    for dim in (1, 2, 3):
        for (p, q) in PAIRS_C2:
            for omega in (0.0, 0.1, 1.0):
                margins.append(strauss_bound_check(ground_state(dim, p, q, omega)))
    ok = all(m >= -1e-8 for m in margins)
    _report(11, f"radial sup bound margin >= -1e-8 on {len(margins)} ground "
                f"states (min {min(margins):+.3f})", ok, t0, 90.0)


def test_criterion_12_determinism_and_schema(tmp_path):
    t0 = time.time()
    out1, out2 = tmp_path / "a", tmp_path / "b"
    ok = cli_main(["groundstate", "--out", str(out1)]) == 0
    ok = ok and cli_main(["groundstate", "--out", str(out2)]) == 0
    for name in ("profile.csv", "profile.meta.json", "report.json"):
        ok = ok and (out1 / name).read_bytes() == (out2 / name).read_bytes()
    # round-trip parse of every output
    data = np.loadtxt(out1 / "profile.csv", delimiter=",", skiprows=1)
    ok = ok and data.shape[1] == 3 and np.all(np.isfinite(data))
    header = (out1 / "profile.csv").read_text().splitlines()[0]
    ok = ok and header == "r,phi,dphi"
    for name in ("profile.meta.json", "report.json", "manifest.json"):
        payload = json.loads((out1 / name).read_text())
        ok = ok and payload.get("format_version", "1") == "1"
    m1 = json.loads((out1 / "manifest.json").read_text())
    m2 = json.loads((out2 / "manifest.json").read_text())
    ok = ok and m1["config_hash"] == m2["config_hash"]
    _report(12, "repeated runs byte-identical; all outputs round-trip parse",
            ok, t0, 60.0)
