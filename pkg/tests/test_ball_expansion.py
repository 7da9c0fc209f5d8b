"""
Unit tests for small-ball expansions and the rigidity-branch curvature bounds.

Round oracle: π(2r − sin 2r) = (4π/3) r³ (1 − r²/5 + 2r⁴/105 − …), so
c1 = −1/5 and c2 = 2/105 at both poles.
"""

import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from app.exceptions import HypothesisFailure, MalformedConfig, OutOfRange, PreconditionNotRigid
from app.lab import ball_expansion
from app.lab.ball_expansion import (
    analytic_coefficients,
    area_coefficient6,
    area_expansion,
    default_window,
    fit_coefficients,
    fit_samples,
    ricci_bound_check,
    scalar_bound_check,
)
from app.lab.geodesic_balls import s3_reference_profile
from app.lab.warp_metric import build_metric
from app.schemas import FitWindow, Pole, ProfileSource, ScaledSpec, SeriesSpec

ROUND_C1 = -1.0 / 5.0
ROUND_C2 = 2.0 / 105.0


# ── Coefficient algebra ─────────────────────────────────────────────────────


class TestCoefficientAlgebra:
    def test_round_sixth_order_coefficient(self):
        value = area_coefficient6(Fraction(-1, 5), Fraction(2, 105))
        assert value == Fraction(-11, 225) + Fraction(2, 63)
        assert float(value) == pytest.approx(-0.0171428571, abs=1e-10)

    @given(st.fractions(min_value=0, max_value=1000))
    def test_rigid_identity_is_exact(self, q):
        c2 = (144 - 2 * q) / 6300
        assert area_coefficient6(Fraction(-1, 5), c2) == -q / 1890 - Fraction(17, 1575)

    def test_rigid_identity_on_integer_grid(self):
        for q in range(100):
            c2 = Fraction(144 - 2 * q, 6300)
            assert area_coefficient6(Fraction(-1, 5), c2) == Fraction(-q, 1890) - Fraction(17, 1575)

    def test_area_expansion_tracks_s3_profile(self):
        assert area_expansion(ROUND_C1, ROUND_C2, 0.0) == 0.0
        w = 0.05
        volume = 4.0 * math.pi / 3.0 * w**3
        # Remainder is O(W⁸)
        assert area_expansion(ROUND_C1, ROUND_C2, w) == pytest.approx(s3_reference_profile(volume), rel=1e-9)

    def test_area_expansion_accepts_fractions(self):
        value = area_expansion(Fraction(-1, 5), Fraction(2, 105), Fraction(1, 10))
        assert isinstance(value, float)
        assert value == pytest.approx(4.0 * math.pi / 100.0 * (1 - 1 / 500 - 0.0171428571 / 10**4), rel=1e-10)

    def test_negative_w(self):
        with pytest.raises(OutOfRange):
            area_expansion(ROUND_C1, ROUND_C2, -0.1)


# ── Analytic coefficients ───────────────────────────────────────────────────


class TestAnalyticCoefficients:
    @pytest.mark.parametrize("pole", [Pole.NORTH, Pole.SOUTH])
    def test_round(self, round_metric, pole):
        report = analytic_coefficients(round_metric, pole)
        assert report.scalar == pytest.approx(6.0, abs=1e-12)
        assert report.ric_norm_sq == pytest.approx(12.0, abs=1e-10)
        assert report.c1_analytic == pytest.approx(ROUND_C1, abs=1e-12)
        assert report.c2_analytic == pytest.approx(ROUND_C2, abs=1e-9)

    def test_scaled(self, settings):
        lam = 1.2
        report = analytic_coefficients(build_metric(ScaledSpec(lam=lam), settings), Pole.NORTH)
        assert report.c1_analytic == pytest.approx(-lam**2 / 5.0, rel=1e-10)
        assert report.c2_analytic == pytest.approx(2.0 * lam**4 / 105.0, rel=1e-7)

    def test_perturbed_series_carries_laplacian(self, settings):
        eps = 1e-3
        metric = build_metric(
            SeriesSpec(coefficients=[-1.0 / 6.0, 1.0 / 120.0 + eps], length=1.0, closed=False), settings
        )
        report = analytic_coefficients(metric, Pole.NORTH)
        assert report.laplacian_scalar == pytest.approx(-600.0 * eps, rel=1e-6)
        expected_c2 = (4.0 * 36.0 - 2.0 * report.ric_norm_sq + 9.0 * 600.0 * eps) / 6300.0
        assert report.c2_analytic == pytest.approx(expected_c2, rel=1e-6)


# ── Fitting ─────────────────────────────────────────────────────────────────


class TestFitCoefficients:
    @pytest.mark.parametrize("pole", [Pole.NORTH, Pole.SOUTH])
    def test_round_fit(self, round_metric, settings, pole):
        report = fit_coefficients(round_metric, pole, settings=settings)
        assert report.c1_fitted == pytest.approx(ROUND_C1, abs=1e-4)
        assert report.c2_fitted == pytest.approx(ROUND_C2, abs=5e-4)
        assert report.sample_count == 40
        assert report.fit_window == pytest.approx((0.02 * math.pi, 0.25 * math.pi))

    def test_scaled_fit(self, scaled_metric, settings):
        report = fit_coefficients(scaled_metric, Pole.NORTH, settings=settings)
        assert report.c1_fitted == pytest.approx(report.c1_analytic, abs=1e-4)
        assert report.c2_fitted == pytest.approx(report.c2_analytic, abs=5e-4)

    def test_samples(self, round_metric, settings):
        samples = fit_samples(round_metric, Pole.NORTH, default_window(round_metric, 25), settings)
        assert len(samples.rows()) == 25
        r = samples.radius[0]
        assert samples.excess[0] == pytest.approx(-(r**2) / 5.0 + 2.0 * r**4 / 105.0, abs=1e-8)

    def test_halving_the_window_converges(self, round_metric, settings):
        errors = []
        for k in range(4):
            scale = 2.0**-k
            window = FitWindow(r_min=0.02 * math.pi * scale, r_max=0.25 * math.pi * scale)
            report = fit_coefficients(round_metric, Pole.NORTH, window, settings=settings)
            errors.append(abs(report.c1_fitted - ROUND_C1))
        assert errors[0] < 1e-6
        assert all(later < earlier for earlier, later in zip(errors, errors[1:]))

    @pytest.mark.parametrize("window", [(0.5, 0.2), (0.1, 1.5)])
    def test_bad_window(self, round_metric, settings, window):
        with pytest.raises(MalformedConfig):
            fit_samples(round_metric, Pole.NORTH, FitWindow(r_min=window[0], r_max=window[1]), settings)


# ── Rigidity-branch bounds ──────────────────────────────────────────────────


class TestCurvatureBounds:
    @pytest.mark.parametrize("pole", [Pole.NORTH, Pole.SOUTH])
    @pytest.mark.parametrize("source", [ProfileSource.S3_REFERENCE, ProfileSource.CANDIDATE])
    def test_round_scalar_bound(self, round_metric, round_profile, settings, pole, source):
        report = scalar_bound_check(round_metric, pole, source, profile=round_profile, settings=settings)
        assert report.scalar_equals_six
        assert report.bound_confirmed
        assert abs(report.scalar_slack) < 1e-6
        assert report.implied_c1_lower_bound == pytest.approx(ROUND_C1, abs=1e-7)
        assert report.comparison_holds
        assert len(report.comparisons) == 6

    @pytest.mark.parametrize("pole", [Pole.NORTH, Pole.SOUTH])
    def test_round_ricci_bound(self, round_metric, round_profile, settings, pole):
        scalar = scalar_bound_check(round_metric, pole, profile=round_profile, settings=settings)
        report = ricci_bound_check(round_metric, pole, scalar, settings)
        assert report.einstein and report.bound_holds
        assert abs(report.ric_norm_sq - 12.0) < 1e-6
        assert report.identity_residual < 1e-10
        assert report.area_coefficient6 == pytest.approx(analytic_coefficients(round_metric, pole).area_coefficient6)
        assert abs(report.laplacian_scalar) < 1e-6
        assert report.cauchy_schwarz_floor == pytest.approx(12.0, abs=1e-10)

    def test_not_rigid_profile_is_refused(self, scaled_metric, settings):
        with pytest.raises(PreconditionNotRigid):
            scalar_bound_check(scaled_metric, Pole.NORTH, settings=settings)

    def test_hypotheses_are_required(self, settings):
        metric = build_metric(ScaledSpec(lam=0.9), settings)
        with pytest.raises(HypothesisFailure):
            scalar_bound_check(metric, Pole.NORTH, settings=settings)

    def test_ricci_needs_scalar_six(self, round_metric, round_profile, settings):
        scalar = scalar_bound_check(round_metric, Pole.NORTH, profile=round_profile, settings=settings)
        broken = scalar.model_copy(update={"scalar_equals_six": False})
        with pytest.raises(PreconditionNotRigid):
            ricci_bound_check(round_metric, Pole.NORTH, broken, settings)

    def test_small_ball_beating_the_profile_is_not_confirmed(self, round_metric, round_profile, settings, monkeypatch):
        real = ball_expansion.area_expansion

        def shrunk(c1, c2, w):
            return real(c1, c2, w) * 0.99

        monkeypatch.setattr(ball_expansion, "area_expansion", shrunk)
        report = scalar_bound_check(
            round_metric, Pole.NORTH, ProfileSource.CANDIDATE, profile=round_profile, settings=settings
        )
        assert report.scalar_equals_six
        assert not report.comparison_holds
        assert not report.bound_confirmed
        with pytest.raises(PreconditionNotRigid):
            ricci_bound_check(round_metric, Pole.NORTH, report, settings)

    def test_nonzero_laplacian_breaks_the_identity(self, round_metric, round_profile, settings):
        eps = 1e-3
        perturbed = build_metric(
            SeriesSpec(coefficients=[-1.0 / 6.0, 1.0 / 120.0 + eps], length=1.0, closed=False), settings
        )
        analytic = analytic_coefficients(perturbed, Pole.NORTH)
        assert analytic.scalar == pytest.approx(6.0, abs=1e-12)
        identity = -analytic.ric_norm_sq / 1890.0 - 17.0 / 1575.0
        # W⁶ coefficient drifts by −ΔR/420
        assert analytic.area_coefficient6 - identity == pytest.approx(-analytic.laplacian_scalar / 420.0, rel=1e-6)

        # A confirmed scalar report does not let ΔR ≠ 0 through
        scalar = scalar_bound_check(round_metric, Pole.NORTH, profile=round_profile, settings=settings)
        with pytest.raises(PreconditionNotRigid, match="ΔR"):
            ricci_bound_check(perturbed, Pole.NORTH, scalar, settings)
