"""Tests for the explicit profiles, the mass curve and the regime classifier."""

import math

import numpy as np
import pytest

from rnls_lab.core_layer.functionals import energy, mass
from rnls_lab.core_layer.grid import auto_grid, make_grid
from rnls_lab.errors import ProfileDecayError, UsageError
from rnls_lab.models import ModelParams, RegimeLabel
from rnls_lab.theory_layer.closed_forms import (
    c_p,
    classify_regime,
    gradient_ratio,
    im_scaling_exponent,
    mass_curve,
    me_explicit_d1k1,
    omega3,
    omega_thresholds,
    p_critical,
    phi_profile,
    profile_norms,
    q_exact_1d,
    q_exact_1d_derivatives,
)


def _curve(d, k, p, beta=1.0):
    return mass_curve(ModelParams(d=d, k=k, p=p, beta=beta))


class TestProfiles:

    def test_critical_exponents(self):
        assert p_critical(1) == math.inf
        assert p_critical(2) == math.inf
        assert p_critical(3) == 4.0

    def test_cubic_profile_peak(self):
        assert q_exact_1d(2.0, 0.0) == pytest.approx(math.sqrt(2.0), rel=1e-15)

    @pytest.mark.parametrize("p", [1.0, 2.0, 4.0, 6.0])
    def test_profile_solves_ode(self, p):
        x = np.linspace(-15.0, 15.0, 601)
        q, _, q_xx = q_exact_1d_derivatives(p, x)
        np.testing.assert_allclose(q_xx - q + q ** (p + 1.0), 0.0, atol=1e-12)

    def test_profile_does_not_overflow_far_out(self):
        assert q_exact_1d(2.0, 1e4) == 0.0

    def test_sech_integral(self):
        assert c_p(2.0) == pytest.approx(2.0, rel=1e-14)
        assert c_p(4.0) == pytest.approx(math.pi, rel=1e-14)

    def test_cubic_norms_are_exact(self):
        norms = profile_norms(1, 2.0)
        assert norms["l2_sq"] == pytest.approx(4.0, rel=1e-14)
        assert norms["grad_sq"] == pytest.approx(4.0 / 3.0, rel=1e-14)
        assert norms["lp_power"] == pytest.approx(16.0 / 3.0, rel=1e-14)

    def test_gradient_ratio(self):
        assert gradient_ratio(1, 6.0, 1) == pytest.approx(0.6)
        assert gradient_ratio(2, 2.0, 0) == 0.0

    def test_phi_profile_scaling(self):
        params = ModelParams(d=1, k=0, p=2.0, omega=4.0)
        grid = auto_grid(params, n=512)
        phi = phi_profile(params, grid)
        assert phi.values[256].real == pytest.approx(2.0 * math.sqrt(2.0), rel=1e-14)

    def test_small_box_fails_decay_check(self):
        params = ModelParams(d=1, k=0, p=2.0, omega=1.0)
        with pytest.raises(ProfileDecayError):
            phi_profile(params, make_grid(1, 0, [64], [8.0]))

    def test_grid_must_match_parameters(self):
        params = ModelParams(d=1, k=1, p=2.0, omega=1.0)
        with pytest.raises(UsageError):
            phi_profile(params, make_grid(1, 0, [64], [64.0]))


class TestMassCurve:

    def test_cubic_mass_and_energy(self):
        curve = _curve(1, 0, 2.0)
        assert curve.m(1.0) == pytest.approx(2.0, rel=1e-14)
        assert curve.energy(1.0) == pytest.approx(-2.0 / 3.0, rel=1e-14)

    def test_l2_critical_mass_is_constant(self):
        curve = _curve(1, 0, 4.0)
        assert abs(curve.m(1.0) - curve.m(5.0)) <= 1e-10
        assert curve.m_prime(2.0) == 0.0

    def test_regularized_critical_limit(self):
        curve = _curve(1, 1, 4.0)
        assert curve.m(1e-8) == pytest.approx(math.sqrt(3.0) * math.pi / 4.0, abs=1e-4)
        assert curve.m(1.0) == pytest.approx(2.4048, abs=1e-3)

    @pytest.mark.parametrize("d,k,p", [(1, 0, 2.0), (1, 1, 2.0), (1, 1, 6.0), (1, 0, 6.0)])
    def test_closed_slope_matches_finite_difference(self, d, k, p):
        curve = _curve(d, k, p)
        omegas = np.array([0.05, 1.0, 3.0])
        np.testing.assert_allclose(curve.m_prime(omegas), curve.m_prime_fd(omegas), rtol=1e-6)

    def test_rejects_nonpositive_omega(self):
        with pytest.raises(UsageError):
            _curve(1, 0, 2.0).m(0.0)

    @pytest.mark.parametrize("p", [2.0, 4.0, 6.0])
    @pytest.mark.parametrize("beta", [0.5, 1.0])
    @pytest.mark.parametrize("omega", [0.25, 1.0, 5.0])
    def test_explicit_d1k1_matches_curve(self, p, beta, omega):
        m, e = me_explicit_d1k1(p, beta, omega)
        curve = _curve(1, 1, p, beta)
        assert m == pytest.approx(curve.m(omega), rel=1e-10)
        assert e == pytest.approx(curve.energy(omega), rel=1e-10, abs=1e-10 * m)

    @pytest.mark.parametrize("p", [2.0, 4.0, 6.0])
    @pytest.mark.parametrize("beta", [0.5, 1.0])
    @pytest.mark.parametrize("omega", [0.25, 1.0, 5.0])
    def test_explicit_d1k1_matches_grid_quadrature(self, p, beta, omega):
        params = ModelParams(d=1, k=1, p=p, beta=beta, omega=omega)
        phi = phi_profile(params, auto_grid(params))
        m, e = me_explicit_d1k1(p, beta, omega)
        assert m == pytest.approx(mass(phi, beta), rel=1e-8)
        assert e == pytest.approx(energy(phi, p), rel=1e-8, abs=1e-8 * m)

    @pytest.mark.parametrize("p", [5.0, 6.0, 8.0])
    @pytest.mark.parametrize("beta", [0.5, 1.0])
    def test_positive_root_is_omega1(self, p, beta):
        omega1, omega2 = omega_thresholds(p, beta)
        assert _curve(1, 1, p, beta).omega0() == pytest.approx(omega1, rel=1e-10)
        assert omega2 == (p - 4.0) / (4.0 * beta)

    def test_thresholds_for_sextic(self):
        omega1, omega2 = omega_thresholds(6.0, 1.0)
        assert omega1 == pytest.approx(0.2135, abs=1e-4)
        assert omega2 == 0.5
        assert omega_thresholds(4.0, 1.0) is None

    def test_energy_changes_sign_at_omega2(self):
        curve = _curve(1, 1, 6.0)
        assert curve.energy(0.4) > 0
        assert curve.energy(0.6) < 0

    def test_slope_changes_sign_once(self):
        curve = _curve(1, 1, 6.0)
        omegas = np.linspace(0.01, 2.0, 200)
        signs = np.sign(curve.table(omegas)["m_prime_closed"].to_numpy())
        flips = np.flatnonzero(np.diff(signs))
        assert flips.size == 1
        assert omegas[flips[0]] < 0.2135 < omegas[flips[0] + 1]

    def test_omega3_shares_mass_with_omega2(self):
        curve = _curve(1, 1, 6.0)
        omega1, omega2 = omega_thresholds(6.0, 1.0)
        w3 = omega3(6.0, 1.0)
        assert w3 < omega1
        assert curve.m(w3) == pytest.approx(curve.m(omega2), rel=1e-10)

    def test_im_scaling_exponent(self):
        assert im_scaling_exponent(1, 2.0) == pytest.approx(3.0)
        with pytest.raises(UsageError):
            im_scaling_exponent(1, 4.0)


class TestClassifier:

    @pytest.mark.parametrize("d,k,p,label", [
        (1, 0, 2.0, RegimeLabel.SUBCRITICAL_ALL_STABLE),
        (1, 0, 4.0, RegimeLabel.CRITICAL_K0),
        (1, 0, 6.0, RegimeLabel.SUPERCRITICAL_K0),
        (1, 1, 6.0, RegimeLabel.BAND_WITH_M0),
        (2, 1, 4.0, RegimeLabel.BOUNDARY_UNCOVERED),
        (2, 1, 5.0, RegimeLabel.SUPERCRITICAL_K1),
    ])
    def test_labels(self, d, k, p, label):
        assert classify_regime(ModelParams(d=d, k=k, p=p)).classification is label

    def test_focusing_exponent_follows_dimension(self):
        assert ModelParams(d=2, k=0, p=2.0).focusing_threshold == 2.0
        below = classify_regime(ModelParams(d=1, k=0, p=3.9))
        above = classify_regime(ModelParams(d=1, k=0, p=4.1))
        assert below.classification is RegimeLabel.SUBCRITICAL_ALL_STABLE
        assert above.classification is RegimeLabel.SUPERCRITICAL_K0

    def test_supercritical_verdict(self):
        report = classify_regime(ModelParams(d=1, k=0, p=6.0))
        assert "-inf" in report.im_verdict
        assert report.im_finite is False
        assert not report.admits_minimization(1.0)

    def test_critical_mass_for_k0(self):
        report = classify_regime(ModelParams(d=1, k=0, p=4.0))
        assert report.m0 == pytest.approx(math.sqrt(3.0) * math.pi / 4.0, rel=1e-12)
        assert report.admits_minimization(1.0)
        assert not report.admits_minimization(2.0)

    def test_sextic_band_thresholds(self):
        report = classify_regime(ModelParams(d=1, k=1, p=6.0, beta=1.0))
        curve = _curve(1, 1, 6.0)
        assert report.omega0 == pytest.approx(report.omega1, rel=1e-10)
        assert report.omega2 == 0.5
        assert report.m0 == pytest.approx(curve.m(0.5), rel=1e-14)
        assert report.m1 == pytest.approx(curve.m(report.omega1), rel=1e-14)
        assert report.m1 < report.m0
        assert report.omega3 < report.omega1

    def test_quartic_band_reports_limit_mass(self):
        report = classify_regime(ModelParams(d=1, k=1, p=4.0, beta=1.0))
        assert report.classification is RegimeLabel.BAND_WITH_M0
        assert report.m0 == pytest.approx(math.sqrt(3.0) * math.pi / 4.0, abs=1e-4)

    def test_energy_critical_exponent_is_rejected(self):
        with pytest.raises(UsageError):
            classify_regime(ModelParams(d=3, k=0, p=4.0))
