"""Tests for barrier functions, Ito terms and the safety margins."""
import math

import numpy as np
import pytest

from scbf.barrier import (
    BoundaryError,
    SdeModel,
    deterministic_bc,
    ito_terms,
    legacy_scbf_margin,
    make_h_oa,
    make_h_po,
    scbf_margin,
)
from scbf.core import StrengtheningFn


def advertising_model(beta=0.1):
    return SdeModel(
        drift_f=lambda x: -beta * x,
        drift_g=lambda x: 1.0 - x,
        diffusion_sigma=lambda x, u: 0.0,
        u_lo=0.0,
        u_hi=2.0,
        x_lo=0.0,
        x_hi=1.0,
        deterministic=True,
    )


def soa_model(beta=0.1, r_eff=1.0, sigma_a=0.1):
    return SdeModel(
        drift_f=lambda x: -beta * x,
        drift_g=lambda x: r_eff * math.sqrt(max(0.0, 1.0 - x)),
        diffusion_sigma=lambda x, u: sigma_a * x,
        u_lo=0.0,
        u_hi=2.0,
        x_lo=0.0,
        x_hi=1.0,
    )


def portfolio_model(eps_b=0.02, eps_r=0.16, sigma_po=0.11):
    return SdeModel(
        drift_f=lambda x: eps_b * x,
        drift_g=lambda x: eps_r - eps_b,
        diffusion_sigma=lambda x, u: sigma_po * u,
        u_lo=0.0,
        u_hi=2000.0,
    )


def central_diff(f, x, step):
    return (f(x + step) - f(x - step)) / (2.0 * step)


class TestBarrierSpecs:
    def test_h_oa_boundary_and_origin(self):
        spec = make_h_oa(0.6)
        assert spec.h(0.6) == pytest.approx(0.0, abs=1e-15)
        assert spec.h(0.0) == pytest.approx(0.36, abs=1e-15)

    def test_h_oa_interior_values(self):
        spec = make_h_oa(0.4)
        assert spec.h(0.2) == pytest.approx(0.12, rel=1e-14)
        assert spec.dh_dx(0.2) == pytest.approx(-0.4, rel=1e-14)

    def test_h_po_values(self):
        spec = make_h_po(500.0)
        assert spec.h(500.0) == 0.0
        assert spec.h(550.0) == pytest.approx(float(550**2 - 500**2), rel=1e-15)
        assert spec.h(550.0) == pytest.approx(52500.0)
        assert spec.h(499.0) < 0.0  # unsafe side is reported, not an error

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            make_h_oa(1.0)
        with pytest.raises(ValueError):
            make_h_oa(-0.1)
        with pytest.raises(ValueError):
            make_h_po(0.0)
        with pytest.raises(ValueError):
            make_h_po(-5.0)

    @pytest.mark.parametrize(
        "spec,lo,hi,step",
        [
            (make_h_oa(0.6), 0.01, 0.99, 1e-6),
            (make_h_oa(0.4), 0.01, 0.99, 1e-6),
            (make_h_po(500.0), 100.0, 5000.0, 1e-3),
        ],
    )
    def test_derivatives_match_finite_differences(self, spec, lo, hi, step):
        rng = np.random.default_rng(11)
        for x in rng.uniform(lo, hi, size=50):
            fd1 = central_diff(spec.h, x, step)
            fd2 = central_diff(spec.dh_dx, x, step)
            assert spec.dh_dx(x) == pytest.approx(fd1, rel=1e-6, abs=1e-9)
            assert spec.d2h_dx2(x) == pytest.approx(fd2, rel=1e-6, abs=1e-9)


class TestDeterministicBc:
    def test_hand_expanded_value(self):
        # beta=0.1, x=0.5, u=0, eta=10, x_max=0.6:
        # 2*beta*x^2 + alpha(h) = 2*0.1*0.25 + 10*0.11 = 1.15
        margin = deterministic_bc(make_h_oa(0.6), advertising_model(), StrengtheningFn(eta=10.0), 0.5, 0.0)
        assert margin == pytest.approx(1.15, rel=1e-14)

    def test_matches_hand_expansion_over_samples(self):
        spec, model, alpha = make_h_oa(0.6), advertising_model(beta=0.1), StrengtheningFn(eta=10.0)
        rng = np.random.default_rng(3)
        for _ in range(100):
            x = rng.uniform(0.01, 0.99)
            u = rng.uniform(0.0, 2.0)
            hand = 2 * 0.1 * x * x - 2 * x * (1 - x) * u + 10.0 * (0.36 - x * x)
            assert deterministic_bc(spec, model, alpha, x, u) == pytest.approx(hand, rel=1e-12)

    def test_nagumo_boundary_case(self):
        # at h=0 with u chosen so hdot=0 the margin vanishes exactly
        spec, model, alpha = make_h_oa(0.6), advertising_model(beta=0.1), StrengtheningFn(eta=10.0)
        x = 0.6
        u = 0.1 * x / (1.0 - x)  # beta*x = (1-x)*u
        margin = deterministic_bc(spec, model, alpha, x, u)
        assert margin == pytest.approx(0.0, abs=1e-14)

    def test_affine_in_u(self):
        spec, model, alpha = make_h_oa(0.6), advertising_model(), StrengtheningFn(eta=10.0)
        rng = np.random.default_rng(5)
        for _ in range(50):
            x = rng.uniform(0.01, 0.99)
            u = rng.uniform(-3.0, 3.0)
            base = deterministic_bc(spec, model, alpha, x, 0.0)
            slope = spec.dh_dx(x) * model.drift_g(x)
            assert deterministic_bc(spec, model, alpha, x, u) - base == pytest.approx(slope * u, rel=1e-12, abs=1e-14)

    def test_rejects_stochastic_model(self):
        with pytest.raises(ValueError):
            deterministic_bc(make_h_oa(0.4), soa_model(), StrengtheningFn(eta=1.0), 0.3, 0.1)


class TestItoTerms:
    def test_zero_diffusion_degenerates(self):
        spec, model = make_h_oa(0.6), advertising_model()
        t = ito_terms(spec, model, 0.5, 0.3)
        assert t.sigma_tilde == 0.0
        hdot = spec.dh_dx(0.5) * (model.drift_f(0.5) + model.drift_g(0.5) * 0.3)
        assert t.mu_tilde == pytest.approx(hdot, rel=1e-14)

    def test_stochastic_advertising_hand_value(self):
        # x=0.3, u=0, beta=0.1, sigma_a=0.1:
        # mu = 2*0.1*0.09 - 0.01*0.09 = 0.0171, sigma = -2*0.1*0.09 = -0.018
        t = ito_terms(make_h_oa(0.4), soa_model(), 0.3, 0.0)
        assert t.mu_tilde == pytest.approx(0.0171, rel=1e-12)
        assert t.sigma_tilde == pytest.approx(-0.018, rel=1e-12)

    def test_portfolio_hand_value(self):
        # x=550, u=100: mu = 2*550*(0.02*550+0.14*100) + (0.11*100)^2 = 27621
        #               sigma = 2*550*11 = 12100
        t = ito_terms(make_h_po(500.0), portfolio_model(), 550.0, 100.0)
        assert t.mu_tilde == pytest.approx(27621.0, rel=1e-12)
        assert t.sigma_tilde == pytest.approx(12100.0, rel=1e-12)

    def test_soa_generic_equals_hand_expansion(self):
        spec, model = make_h_oa(0.4), soa_model(beta=0.1, r_eff=1.0, sigma_a=0.1)
        rng = np.random.default_rng(8)
        for _ in range(200):
            x = rng.uniform(0.01, 0.99)
            u = rng.uniform(0.0, 2.0)
            t = ito_terms(spec, model, x, u)
            mu_hand = -2 * x * (-0.1 * x + math.sqrt(1 - x) * u) - (0.1 * x) ** 2
            sig_hand = -2 * x * (0.1 * x)
            assert t.mu_tilde == pytest.approx(mu_hand, rel=1e-12, abs=1e-15)
            assert t.sigma_tilde == pytest.approx(sig_hand, rel=1e-12, abs=1e-15)


class TestScbfMargin:
    def test_diffusion_free_reduction(self):
        spec, model, alpha = make_h_oa(0.6), advertising_model(), StrengtheningFn(eta=10.0)
        x, u = 0.2, 0.5
        h = spec.h(x)
        hdot = spec.dh_dx(x) * (model.drift_f(x) + model.drift_g(x) * u)
        margin = scbf_margin(spec, model, alpha, x, u)
        assert margin == pytest.approx(hdot + h * h * alpha(h), rel=1e-12)

    def test_boundary_error(self):
        spec, model, alpha = make_h_po(500.0), portfolio_model(), StrengtheningFn(eta=1e-16)
        with pytest.raises(BoundaryError):
            scbf_margin(spec, model, alpha, 500.0, 1.0)
        with pytest.raises(BoundaryError):
            scbf_margin(spec, model, alpha, 490.0, 1.0)

    def test_portfolio_optimal_scale_control_is_inactive(self):
        # u=5.2 at x=550 sits strictly inside the feasible set
        spec, model, alpha = make_h_po(500.0), portfolio_model(), StrengtheningFn(eta=1e-16)
        margin = scbf_margin(spec, model, alpha, 550.0, 5.2)
        assert margin > 0.0
        # verified against a dense grid of controls: u=5.2 is not near the sign change
        u_grid = np.linspace(0.0, 20.0, 2001)
        margins = np.array([scbf_margin(spec, model, alpha, 550.0, u) for u in u_grid])
        assert margins.min() > 0.0

    def test_quadratic_in_u_with_known_leading_coefficient(self):
        spec, model, alpha = make_h_po(500.0), portfolio_model(), StrengtheningFn(eta=1e-16)
        rng = np.random.default_rng(2)
        for _ in range(25):
            x = rng.uniform(510.0, 3000.0)
            h = spec.h(x)
            u_pts = np.array([-7.0, 3.0, 11.0, 400.0])
            m_pts = np.array([scbf_margin(spec, model, alpha, x, u) for u in u_pts])
            coeffs = np.polyfit(u_pts, m_pts, 2)
            a2_expected = 0.11**2 * (1.0 - 4.0 * x * x / h)
            assert coeffs[0] == pytest.approx(a2_expected, rel=1e-6)
            assert a2_expected < 0.0  # h < 4x^2 for all x > x_min > 0


class TestLegacyMargin:
    def test_zero_diffusion_equals_deterministic_bc(self):
        spec, model, alpha = make_h_oa(0.6), advertising_model(), StrengtheningFn(eta=10.0)
        rng = np.random.default_rng(4)
        for _ in range(50):
            x, u = rng.uniform(0.05, 0.95), rng.uniform(0.0, 2.0)
            assert legacy_scbf_margin(spec, model, alpha, x, u) == pytest.approx(
                deterministic_bc(spec, model, alpha, x, u), rel=1e-14
            )

    def test_algebraic_identity_with_corrected_margin(self):
        # corrected = legacy - sigma^2/h + h^2*alpha(h) - alpha(h), identically
        spec, model, alpha = make_h_oa(0.4), soa_model(), StrengtheningFn(eta=500.0)
        rng = np.random.default_rng(6)
        for _ in range(100):
            x, u = rng.uniform(0.01, 0.39), rng.uniform(0.0, 2.0)
            h = spec.h(x)
            sig = ito_terms(spec, model, x, u).sigma_tilde
            lhs = scbf_margin(spec, model, alpha, x, u)
            rhs = legacy_scbf_margin(spec, model, alpha, x, u) - sig * sig / h + h * h * alpha(h) - alpha(h)
            assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)

    def test_affine_in_u_for_state_only_diffusion(self):
        # with noise independent of the control the legacy margin is affine in u
        spec, model, alpha = make_h_oa(0.4), soa_model(), StrengtheningFn(eta=100.0)
        rng = np.random.default_rng(9)
        for _ in range(50):
            x = rng.uniform(0.05, 0.95)
            u1, u2, u3 = rng.uniform(-2.0, 2.0, size=3)
            m = lambda u: legacy_scbf_margin(spec, model, alpha, x, u)
            slope_a = (m(u2) - m(u1)) / (u2 - u1)
            slope_b = (m(u3) - m(u2)) / (u3 - u2)
            assert slope_a == pytest.approx(slope_b, rel=1e-9, abs=1e-12)

    def test_brownian_counterexample_margin_positive_without_authority(self):
        # uncontrolled Brownian motion, h=x: the superseded condition reports
        # margin alpha(x) > 0 although no control can prevent escape
        from scbf.barrier import BarrierSpec

        spec = BarrierSpec(h=lambda x: x, dh_dx=lambda x: 1.0, d2h_dx2=lambda x: 0.0)
        model = SdeModel(
            drift_f=lambda x: 0.0,
            drift_g=lambda x: 0.0,
            diffusion_sigma=lambda x, u: 1.0,
            u_lo=-1.0,
            u_hi=1.0,
        )
        alpha = StrengtheningFn(eta=1.0)
        for x in (0.1, 0.5, 2.0):
            assert legacy_scbf_margin(spec, model, alpha, x, 0.0) == pytest.approx(x, rel=1e-14)
