import math

import numpy as np
import pytest

from levy_optstop import (
    DomainError,
    Family,
    LevyModel,
    MissingPhiError,
    laplace_identity_residual,
    phi_right_inverse,
    resolvent_density,
    scale_eval,
)

from conftest import BS_Q, JD_Q


class TestScaleEval:
    def test_support_convention(self, bs_model, jd_model):
        for model, q in ((bs_model, BS_Q), (jd_model, JD_Q)):
            se = scale_eval(model, q, -1.0)
            assert se.w == se.w_prime == se.w_double_prime == 0.0

    def test_bs_boundary_behaviour(self, bs_model):
        at_zero = scale_eval(bs_model, BS_Q, 0.0)
        assert at_zero.w == pytest.approx(0.0, abs=1e-14)
        assert at_zero.w_prime == pytest.approx(2.0 / 0.04, rel=1e-12)

    def test_bs_closed_form_value(self, bs_model):
        expected = 200.0 * math.exp(-0.75) * math.sinh(0.25)
        assert scale_eval(bs_model, BS_Q, 1.0).w == pytest.approx(expected, rel=1e-13)

    def test_missing_phi_raises(self, bs_model):
        with pytest.raises(MissingPhiError):
            scale_eval(bs_model, -0.02, 0.5)

    def test_increasing_near_origin(self, bs_model, jd_model):
        # For negative rates the closed form is increasing on an initial
        # stretch only (it eventually decays); the classical monotonicity is
        # checked there and, for a positive rate, on the whole grid.
        for model, q in ((bs_model, BS_Q), (jd_model, JD_Q)):
            grid = np.linspace(1e-6, 1.0, 100)
            vals = [scale_eval(model, q, float(x)).w for x in grid]
            assert np.all(np.diff(vals) > 0.0)
        grid = np.linspace(1e-6, 5.0, 100)
        vals = [scale_eval(bs_model, 0.02, float(x)).w for x in grid]
        assert np.all(np.diff(vals) > 0.0)

    def test_nonnegative(self, bs_model, jd_model):
        # W(0) is an exact cancellation of residues, so allow rounding there.
        for model, q in ((bs_model, BS_Q), (jd_model, JD_Q)):
            for x in np.linspace(0.0, 6.0, 120):
                assert scale_eval(model, q, float(x)).w >= -1e-12

    @pytest.mark.parametrize("x", [0.05, 0.3, 0.9, 2.0])
    def test_derivative_consistency(self, bs_model, jd_model, x):
        h = 1e-5
        for model, q in ((bs_model, BS_Q), (jd_model, JD_Q)):
            se = scale_eval(model, q, x)
            fd1 = (scale_eval(model, q, x + h).w - scale_eval(model, q, x - h).w) / (2 * h)
            fd2 = (scale_eval(model, q, x + h).w_prime - scale_eval(model, q, x - h).w_prime) / (2 * h)
            assert abs(se.w_prime - fd1) <= 1e-6 * max(1.0, abs(se.w_prime))
            assert abs(se.w_double_prime - fd2) <= 1e-6 * max(1.0, abs(se.w_double_prime))

    def test_jd_small_intensity_matches_bs(self, bs_model):
        tiny = LevyModel(Family.EXP_JUMP_DIFFUSION, mu=bs_model.mu, sigma=bs_model.sigma, lam=1e-12, rho=7.5)
        for x in np.linspace(0.05, 2.0, 40):
            w_bs = scale_eval(bs_model, BS_Q, float(x)).w
            w_jd = scale_eval(tiny, BS_Q, float(x)).w
            assert w_jd == pytest.approx(w_bs, rel=1e-6)

    def test_degenerate_double_root_limit(self):
        # q at the discriminant tangency: W collapses to the linear-exponential form.
        mu, sigma = 0.03, 0.2
        q_tan = -mu * mu / (2.0 * sigma * sigma)
        model = LevyModel(Family.BLACK_SCHOLES, mu=mu, sigma=sigma)
        for x in (0.1, 0.7, 1.9):
            expected = (2.0 * x / sigma**2) * math.exp(-mu * x / sigma**2)
            assert scale_eval(model, q_tan, x).w == pytest.approx(expected, rel=1e-8)
        # Values approach the tangent form continuously from the regular side.
        for x in (0.1, 0.7):
            near = scale_eval(model, q_tan + 1e-10, x).w
            assert near == pytest.approx(scale_eval(model, q_tan, x).w, rel=1e-4)


class TestResolventDensity:
    def test_zero_at_z_zero(self, bs_model):
        assert resolvent_density(bs_model, BS_Q, 0.7, 0.0) == pytest.approx(0.0, abs=1e-14)

    def test_zero_at_x_zero(self, bs_model):
        for z in (0.0, 0.4, 2.0):
            assert resolvent_density(bs_model, BS_Q, 0.0, z) == pytest.approx(0.0, abs=1e-14)

    def test_composition(self, bs_model):
        w05 = scale_eval(bs_model, BS_Q, 0.5).w
        w03 = scale_eval(bs_model, BS_Q, 0.3).w
        expected = math.exp(0.1) * w05 - w03
        assert resolvent_density(bs_model, BS_Q, 0.5, 0.2) == pytest.approx(expected, rel=1e-13)

    def test_domain_error(self, bs_model):
        with pytest.raises(DomainError):
            resolvent_density(bs_model, BS_Q, -0.1, 0.2)


class TestLaplaceIdentity:
    @pytest.mark.parametrize("offset", [0.5, 1.0, 2.0, 5.0, 10.0])
    def test_bs_fixture(self, bs_model, offset):
        phi = phi_right_inverse(bs_model, BS_Q) + offset
        assert laplace_identity_residual(bs_model, BS_Q, phi) <= 1e-8

    @pytest.mark.parametrize("offset", [0.5, 1.0, 2.0, 5.0, 10.0])
    def test_jd_fixture(self, jd_model, offset):
        phi = phi_right_inverse(jd_model, JD_Q) + offset
        assert laplace_identity_residual(jd_model, JD_Q, phi) <= 1e-8

    def test_fast_decay_point(self, bs_model):
        phi = phi_right_inverse(bs_model, BS_Q) + 10.0
        assert laplace_identity_residual(bs_model, BS_Q, phi) <= 1e-10

    def test_domain_error(self, bs_model):
        with pytest.raises(DomainError):
            laplace_identity_residual(bs_model, BS_Q, phi_right_inverse(bs_model, BS_Q) - 0.1)
