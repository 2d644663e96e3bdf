import math

import numpy as np
import pytest

from dpnls import (
    InvalidParams,
    ModelParams,
    RadialProfile,
    TailModel,
    WindowNotFound,
    fit_tail,
    uniform_bound_check,
    zero_mass_limit_study,
)
from conftest import ground_state


def synthetic_power_profile(exponent=2.0, r_hi=1000.0):
    """phi = (1 + r^2)^(-exponent/2): exact power law r^(-exponent) far out."""
    r = np.concatenate([[0.0], np.geomspace(1e-3, r_hi, 6000)])
    v = (1 + r**2) ** (-exponent / 2)
    dv = -exponent * r * (1 + r**2) ** (-exponent / 2 - 1)
    tail = TailModel(kind="algebraic", r_ref=float(r[-1]), value_ref=float(v[-1]),
                     exponent=exponent, log_power=0.0,
                     coefficient=float(v[-1] * r[-1] ** exponent))
    # admissible (p, q) pair whose predicted decay matches the synthetic law
    p = 1 + 2 / exponent
    return RadialProfile(params=ModelParams(1, p, p + 1, 0.0), r_grid=r,
                         values=v, derivs=dv, tail=tail, amplitude=1.0)


class TestFitTail:
    def test_synthetic_power_law(self):
        fit = fit_tail(synthetic_power_profile(2.0))
        assert fit.kind == "algebraic"
        assert fit.fitted_exponent == pytest.approx(2.0, abs=0.02)
        assert fit.residual_rms >= 0
        assert fit.window_lo < fit.window_hi

    def test_synthetic_exponent_recovery_within_1pct(self):
        for expo in (1.0, 1.5, 3.0):
            fit = fit_tail(synthetic_power_profile(expo))
            assert fit.fitted_exponent == pytest.approx(expo, rel=0.01)

    def test_algebraic_ground_state_p3(self, gs):
        fit = fit_tail(gs(1, 3.0, 5.0, 0.0))
        assert fit.theory.exponent == 1.0
        assert fit.fitted_exponent == pytest.approx(1.0, abs=0.02)

    def test_algebraic_ground_state_supercritical_3d(self, gs):
        fit = fit_tail(gs(3, 3.5, 4.0, 0.0))
        assert fit.theory.exponent == 1.0  # N - 2
        assert fit.fitted_exponent == pytest.approx(1.0, abs=0.02)

    def test_exponential_rate(self, gs):
        fit = fit_tail(gs(1, 2.0, 3.0, 0.25))
        assert fit.kind == "exponential"
        assert fit.theory.exponent == pytest.approx(0.5)
        assert fit.fitted_exponent == pytest.approx(0.5, rel=0.02)

    def test_window_not_found_on_short_profile(self):
        r = np.linspace(0, 5, 100)
        v = np.exp(-r)
        prof = RadialProfile(
            params=ModelParams(1, 3.0, 5.0, 0.0), r_grid=r, values=v,
            derivs=-v, tail=TailModel(kind="algebraic", r_ref=5.0,
                                      value_ref=float(v[-1]), exponent=1.0,
                                      log_power=0.0, coefficient=1.0),
            amplitude=1.0)
        with pytest.raises(WindowNotFound):
            fit_tail(prof)

    def test_log_corrected_synthetic(self):
        # phi = r^-2 (log r)^-1 on a far window; expected law for (4, p=2)
        r = np.geomspace(10.0, 1e5, 4000)
        v = r**-2.0 * np.log(r) ** -1.0
        dv = v * (-2.0 / r - 1.0 / (r * np.log(r)))
        tail = TailModel(kind="algebraic", r_ref=float(r[-1]),
                         value_ref=float(v[-1]), exponent=2.0, log_power=1.0,
                         coefficient=1.0)
        prof = RadialProfile(params=ModelParams(4, 2.0, 2.5, 0.0), r_grid=r,
                             values=v, derivs=dv, tail=tail, amplitude=v[0])
        fit = fit_tail(prof)
        assert fit.theory.log_power == pytest.approx(1.0)
        assert fit.fitted_exponent == pytest.approx(2.0, rel=0.02)
        # the log regressor is constrained to the theoretical band
        assert 0.5 <= fit.fitted_log_power <= 1.5


class TestUniformBound:
    def test_singleton_zero_frequency_matches_tail_coefficient(self, gs):
        prof = gs(1, 3.0, 5.0, 0.0)
        c_hat = uniform_bound_check(ModelParams(1, 3.0, 5.0, 0.0), [0.0])
        # phi r^rho on the stabilized window equals the tail coefficient
        assert c_hat == pytest.approx(prof.tail.coefficient, rel=0.02)

    def test_uniform_over_omega_grid(self):
        prm = ModelParams(1, 3.0, 5.0, 0.0)
        c_hat, window, suprema = uniform_bound_check(
            prm, [0.0, 0.5, 1.0], return_details=True)
        assert math.isfinite(c_hat)
        assert c_hat == max(suprema)
        # exponential profiles fall below the algebraic envelope far out
        assert suprema[0] >= suprema[1] >= suprema[2]

    def test_subset_supremum_bounded_by_full(self):
        prm = ModelParams(1, 3.0, 5.0, 0.0)
        full = uniform_bound_check(prm, [0.0, 1.0])
        single = uniform_bound_check(prm, [1.0])
        assert single <= full * (1 + 1e-9)

    def test_rejects_omega_outside_unit_interval(self):
        with pytest.raises(InvalidParams):
            uniform_bound_check(ModelParams(1, 3.0, 5.0, 0.0), [0.0, 2.0])


class TestZeroMassLimit:
    def test_deltas_decrease_p3q5(self):
        study = zero_mass_limit_study(
            ModelParams(1, 3.0, 5.0, 0.0), [0.5, 0.1, 0.02])
        assert all(s == "ok" for s in study.statuses)
        h1 = study.delta_H1dot
        assert np.all(np.diff(h1) < 0.05 * h1[:-1])
        lp = study.delta_Lp1
        assert np.all(np.diff(lp) < 0.05 * lp[:-1])
        assert np.all(study.d_gap > 0)
        assert np.all(np.diff(study.d_gap) < 0)
        assert np.all(np.diff(study.mass_times_omega) < 0)
        assert np.all(study.identity_residual <= 1e-6)

    def test_l2_branch_active_when_mass_finite(self):
        study = zero_mass_limit_study(
            ModelParams(1, 2.0, 3.0, 0.0), [0.5, 0.1])
        assert np.all(np.isfinite(study.delta_L2))
        assert study.delta_L2[1] < study.delta_L2[0]

    def test_sequence_validation(self):
        prm = ModelParams(1, 3.0, 5.0, 0.0)
        with pytest.raises(InvalidParams):
            zero_mass_limit_study(prm, [0.1, 0.5])
        with pytest.raises(InvalidParams):
            zero_mass_limit_study(prm, [0.5, 1e-5])
        with pytest.raises(InvalidParams):
            zero_mass_limit_study(prm, [])
