import math

import numpy as np
import pytest

from levy_optstop import (
    Family,
    InvalidParameterError,
    JumpSign,
    LevyModel,
    PoleProximityError,
    implied_drift,
    laplace_exponent,
    laplace_exponent_derivative,
    phi_right_inverse,
    psi_equation_roots,
)

from conftest import JD_LAM, JD_MU, JD_RHO, JD_SIGMA


class TestModelValidation:
    def test_rejects_zero_sigma(self):
        with pytest.raises(InvalidParameterError):
            LevyModel(Family.BLACK_SCHOLES, mu=0.03, sigma=0.0)

    def test_bs_rejects_jumps(self):
        with pytest.raises(InvalidParameterError):
            LevyModel(Family.BLACK_SCHOLES, mu=0.03, sigma=0.2, lam=0.1)

    def test_bs_canonicalizes_jump_sign(self):
        m = LevyModel(Family.BLACK_SCHOLES, mu=0.03, sigma=0.2, jump_sign=JumpSign.SPECTRALLY_POSITIVE)
        assert m.jump_sign is JumpSign.SPECTRALLY_NEGATIVE

    def test_jd_needs_positive_intensity(self):
        with pytest.raises(InvalidParameterError):
            LevyModel(Family.EXP_JUMP_DIFFUSION, mu=0.03, sigma=0.2, lam=0.0, rho=5.0)


class TestImpliedDrift:
    def test_bs_negative_rate(self):
        assert implied_drift(Family.BLACK_SCHOLES, 0.2, 0.0, 1.0, -0.01, -0.06) == pytest.approx(0.03, abs=1e-15)

    def test_bs_positive_rate(self):
        assert implied_drift(Family.BLACK_SCHOLES, 0.2, 0.0, 1.0, 0.01, -0.06) == pytest.approx(0.05, abs=1e-15)

    def test_zero_intensity_reduces_to_bs(self):
        jd = implied_drift(Family.EXP_JUMP_DIFFUSION, 0.2, 0.0, 7.5, -0.01, -0.06)
        bs = implied_drift(Family.BLACK_SCHOLES, 0.2, 0.0, 7.5, -0.01, -0.06)
        assert jd == bs

    def test_martingale_round_trip(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            sigma = rng.uniform(0.1, 0.5)
            q = rng.uniform(-0.05, 0.05)
            delta = rng.uniform(-0.1, 0.1)
            lam = rng.uniform(0.05, 0.5)
            rho = rng.uniform(2.0, 12.0)
            for family, use_lam in ((Family.BLACK_SCHOLES, 0.0), (Family.EXP_JUMP_DIFFUSION, lam)):
                mu = implied_drift(family, sigma, use_lam, rho, q, delta)
                model = LevyModel(family, mu=mu, sigma=sigma, lam=use_lam, rho=rho)
                assert laplace_exponent(model, 1.0) == pytest.approx(q - delta, abs=1e-14)

    def test_spectrally_positive_round_trip(self):
        mu = implied_drift(
            Family.EXP_JUMP_DIFFUSION, 0.2, 0.2, 7.5, -0.01, -0.06, JumpSign.SPECTRALLY_POSITIVE
        )
        model = LevyModel(
            Family.EXP_JUMP_DIFFUSION, mu=mu, sigma=0.2, lam=0.2, rho=7.5,
            jump_sign=JumpSign.SPECTRALLY_POSITIVE,
        )
        assert laplace_exponent(model, 1.0) == pytest.approx(-0.01 + 0.06, abs=1e-14)

    def test_spectrally_positive_needs_rho_above_one(self):
        with pytest.raises(InvalidParameterError):
            implied_drift(Family.EXP_JUMP_DIFFUSION, 0.2, 0.2, 0.8, -0.01, 0.0, JumpSign.SPECTRALLY_POSITIVE)


class TestLaplaceExponent:
    def test_zero_at_origin(self, bs_model, jd_model):
        assert laplace_exponent(bs_model, 0.0) == 0.0
        assert laplace_exponent(jd_model, 0.0) == 0.0

    def test_bs_at_one(self, bs_model):
        assert laplace_exponent(bs_model, 1.0) == pytest.approx(0.05, abs=1e-15)

    def test_jd_at_one(self, jd_model):
        expected = 0.06 + 0.02 + 1.5 / 8.5 - 0.2
        assert laplace_exponent(jd_model, 1.0) == pytest.approx(expected, abs=1e-15)

    def test_pole_proximity(self, jd_model):
        with pytest.raises(PoleProximityError):
            laplace_exponent(jd_model, -7.5 + 1e-13)

    def test_derivative_examples(self, bs_model, jd_model):
        assert laplace_exponent_derivative(bs_model, 0.0) == pytest.approx(0.03, abs=1e-15)
        assert laplace_exponent_derivative(jd_model, 0.0) == pytest.approx(0.06 - 0.2 / 7.5, abs=1e-15)

    @pytest.mark.parametrize("phi", [-0.5, 0.5, 2.0])
    def test_derivative_finite_difference(self, jd_model, phi):
        h = 1e-5
        fd = (laplace_exponent(jd_model, phi + h) - laplace_exponent(jd_model, phi - h)) / (2 * h)
        assert laplace_exponent_derivative(jd_model, phi) == pytest.approx(fd, abs=1e-6)

    def test_strict_convexity(self, jd_model):
        rng = np.random.default_rng(11)
        for _ in range(200):
            pts = np.sort(rng.uniform(-7.0, 5.0, 3))
            if pts[2] - pts[0] < 1e-3:
                continue
            vals = [laplace_exponent(jd_model, p) for p in pts]
            t = (pts[1] - pts[0]) / (pts[2] - pts[0])
            chord = (1 - t) * vals[0] + t * vals[2]
            assert vals[1] < chord + 1e-12

    def test_reflection_consistency(self, sp_model):
        reflected = sp_model.reflected()
        for phi in np.linspace(-3.0, 3.0, 13):
            assert laplace_exponent(sp_model, phi) == pytest.approx(
                laplace_exponent(reflected, -phi), abs=1e-15
            )


class TestRightInverse:
    def test_bs_closed_form(self, bs_model):
        assert phi_right_inverse(bs_model, -0.01) == pytest.approx(-0.5, abs=1e-12)

    def test_bs_absence(self, bs_model):
        # Discriminant mu^2 + 2 q sigma^2 < 0: no double region, encoded as None.
        assert phi_right_inverse(bs_model, -0.02) is None

    def test_jd_root_properties(self, jd_model):
        phi = phi_right_inverse(jd_model, -0.01)
        assert phi is not None
        assert -JD_RHO < phi < 0.0
        assert laplace_exponent(jd_model, phi) == pytest.approx(-0.01, abs=1e-12)

    def test_residual_invariant(self, jd_model, bs_model):
        for model, q in ((jd_model, -0.01), (bs_model, -0.01), (bs_model, 0.02)):
            phi = phi_right_inverse(model, q)
            assert abs(laplace_exponent(model, phi) - q) <= 1e-12 * max(1.0, abs(q))


class TestRootSet:
    def test_bs_quadratic_roots(self, bs_model):
        roots = psi_equation_roots(bs_model, -0.01)
        assert roots.all_real
        assert roots.phi_q == pytest.approx(-0.5, abs=1e-12)
        assert roots.negative_roots[0] == pytest.approx(-1.0, abs=1e-12)

    def test_jd_three_real_roots(self, jd_model):
        roots = psi_equation_roots(jd_model, -0.01)
        assert roots.all_real
        assert len(roots.all_roots) == 3
        for r in roots.all_roots:
            assert abs(laplace_exponent(jd_model, r) - (-0.01)) <= 1e-10

    def test_jd_vieta(self, jd_model):
        roots = sorted(psi_equation_roots(jd_model, -0.01).all_roots)
        a3, a2, a1, a0 = 0.02, JD_MU + 0.02 * JD_RHO, JD_MU * JD_RHO - JD_LAM + 0.01, 0.01 * JD_RHO
        assert sum(roots) == pytest.approx(-a2 / a3, rel=1e-9)
        assert roots[0] * roots[1] * roots[2] == pytest.approx(-a0 / a3, rel=1e-9)

    def test_jd_discriminant_flip(self, jd_model):
        # The rightmost pair of roots merges as q falls to the branch minimum
        # (about -0.0116 for this fixture) and leaves the real axis below it.
        flipped = psi_equation_roots(jd_model, -0.0117)
        assert not flipped.all_real
        assert flipped.phi_q is None
        assert len(flipped.negative_roots) == 1
        intact = psi_equation_roots(jd_model, -0.0116)
        assert intact.all_real

    def test_near_tangency_bisection_fallback(self, jd_model):
        # Just above the branch minimum the top two roots nearly coincide;
        # the solver must still return three real roots with small residuals.
        q_min = -0.01161371421774221
        roots = psi_equation_roots(jd_model, q_min + 1e-9)
        assert roots.all_real
        for r in roots.all_roots:
            assert abs(laplace_exponent(jd_model, r) - (q_min + 1e-9)) <= 1e-9
