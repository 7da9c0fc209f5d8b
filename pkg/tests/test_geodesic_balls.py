"""
Unit tests for geodesic balls and the candidate profile.

The S³ oracle: a ball of radius r has volume π(2r − sin 2r) and boundary
area 4π sin² r, so I_S³(V) = 4π sin² r(V) and I(π²) = 4π.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings as hypothesis_settings, strategies as st

from app.exceptions import OutOfDomain, OutOfRange
from app.lab.geodesic_balls import (
    S3_VOLUME,
    candidate_area_at,
    candidate_profile,
    central_second_difference,
    radius_for_volume,
    s3_ball_volume,
    s3_radius,
    s3_reference_profile,
    sphere_geometry,
    volume_of_ball,
)
from app.lab.warp_metric import build_metric
from app.schemas import Pole, ScaledSpec

FOUR_PI = 4.0 * math.pi


# ── S³ reference ────────────────────────────────────────────────────────────


class TestS3Reference:
    def test_half_volume_is_equator(self):
        assert s3_reference_profile(math.pi**2) == pytest.approx(FOUR_PI, abs=1e-8)

    def test_endpoints(self):
        assert s3_reference_profile(0.0) == 0.0
        assert s3_reference_profile(S3_VOLUME) == 0.0

    def test_small_ball_series_matches_closed_form(self):
        r = 0.099
        assert s3_ball_volume(r) == pytest.approx(math.pi * (2 * r - math.sin(2 * r)), rel=1e-12)
        assert s3_ball_volume(1e-4) == pytest.approx(4.0 * math.pi / 3.0 * 1e-12, rel=1e-7)

    @given(st.floats(min_value=1e-4, max_value=3.0))
    def test_radius_inverts_volume(self, r):
        assert s3_radius(s3_ball_volume(r)) == pytest.approx(r, rel=1e-9, abs=1e-12)

    def test_volume_out_of_range(self):
        with pytest.raises(OutOfRange):
            s3_radius(2.0 * S3_VOLUME)


# ── Spheres and balls ───────────────────────────────────────────────────────


class TestSphereGeometry:
    def test_round_sphere(self, round_metric):
        sphere = sphere_geometry(round_metric, 1.0, Pole.NORTH)
        assert sphere.area == pytest.approx(FOUR_PI * math.sin(1.0) ** 2, rel=1e-14)
        assert sphere.mean_curvature == pytest.approx(2.0 / math.tan(1.0), rel=1e-14)
        assert sphere.second_form_norm_sq == pytest.approx(sphere.mean_curvature**2 / 2.0)
        assert sphere.normal_ricci_integral == pytest.approx(2.0 * sphere.area, rel=1e-12)
        assert sphere.scalar_integral == pytest.approx(6.0 * sphere.area, rel=1e-10)

    def test_south_pole_mirrors_north(self, scaled_metric):
        north = sphere_geometry(scaled_metric, 0.7, Pole.NORTH)
        south = sphere_geometry(scaled_metric, 0.7, Pole.SOUTH)
        assert south.area == pytest.approx(north.area, rel=1e-13)
        assert south.mean_curvature == pytest.approx(north.mean_curvature, rel=1e-12)

    @pytest.mark.parametrize("r", [0.0, math.pi, -0.1])
    def test_degenerate_radius(self, round_metric, r):
        with pytest.raises(OutOfDomain):
            sphere_geometry(round_metric, r, Pole.NORTH)


class TestBallVolumes:
    def test_round_ball_volume(self, round_metric, settings):
        r = np.array([0.1, 1.0, 2.0, math.pi])
        expected = math.pi * (2.0 * r - np.sin(2.0 * r))
        np.testing.assert_allclose(volume_of_ball(round_metric, r, Pole.NORTH, settings), expected, rtol=1e-12)

    def test_scalar_input_returns_float(self, round_metric, settings):
        assert isinstance(volume_of_ball(round_metric, 1.0, settings=settings), float)

    def test_poles_partition_the_volume(self, scaled_metric, settings):
        r = 0.4 * scaled_metric.length
        north = volume_of_ball(scaled_metric, r, Pole.NORTH, settings)
        south = volume_of_ball(scaled_metric, scaled_metric.length - r, Pole.SOUTH, settings)
        assert north + south == pytest.approx(scaled_metric.total_volume, rel=1e-12)

    @hypothesis_settings(deadline=None, max_examples=30)
    @given(st.floats(min_value=1e-3, max_value=0.999))
    def test_radius_for_volume_inverts(self, round_metric, settings, fraction):
        volume = fraction * round_metric.total_volume
        r = radius_for_volume(round_metric, volume, Pole.NORTH, settings)
        assert volume_of_ball(round_metric, r, Pole.NORTH, settings) == pytest.approx(volume, rel=1e-12)
        assert r == pytest.approx(s3_radius(volume), rel=1e-10)

    def test_radius_for_volume_range(self, round_metric, settings):
        assert radius_for_volume(round_metric, 0.0, settings=settings) == 0.0
        assert radius_for_volume(round_metric, round_metric.total_volume, settings=settings) == round_metric.length
        with pytest.raises(OutOfRange):
            radius_for_volume(round_metric, 1.01 * round_metric.total_volume, settings=settings)

    def test_ball_outside_domain(self, round_metric, settings):
        with pytest.raises(OutOfDomain):
            volume_of_ball(round_metric, 4.0, settings=settings)


# ── Candidate profile ───────────────────────────────────────────────────────


class TestCandidateProfile:
    def test_matches_s3_profile(self, round_profile):
        assert len(round_profile) == 513
        interior = slice(1, -1)
        expected = np.array([s3_reference_profile(v) for v in round_profile.volume[interior]])
        np.testing.assert_allclose(round_profile.area[interior], expected, rtol=1e-6)

    def test_equator_area(self, round_profile):
        middle = len(round_profile) // 2
        assert round_profile.volume[middle] == pytest.approx(math.pi**2, rel=1e-11)
        assert round_profile.area[middle] == pytest.approx(FOUR_PI, abs=1e-8)

    def test_endpoints(self, round_profile):
        assert round_profile.area[0] == 0.0 and round_profile.area[-1] == 0.0
        assert round_profile.iprime[0] == math.inf and round_profile.iprime[-1] == -math.inf

    def test_iprime_is_mean_curvature(self, round_profile):
        k = 100
        assert round_profile.iprime[k] == pytest.approx(2.0 / math.tan(round_profile.radius[k]), rel=1e-12)

    def test_profile_is_symmetric(self, round_profile):
        np.testing.assert_allclose(round_profile.area, round_profile.area[::-1], rtol=1e-9, atol=1e-12)

    def test_tie_between_poles_goes_north(self, scaled_metric, settings):
        point = candidate_area_at(scaled_metric, 0.8 * scaled_metric.total_volume, settings)
        # Both balls enclose the same sphere on a symmetric metric; the tie goes north
        assert point.pole == Pole.NORTH
        assert point.mean_curvature < 0.0

    @pytest.mark.parametrize("lam", [1.0, 1.2])
    def test_concave_under_positive_ricci(self, settings, lam):
        profile = candidate_profile(build_metric(ScaledSpec(lam=lam), settings), 512, settings)
        interior = profile.isecond[1:-1]
        assert np.all(np.isfinite(interior))
        assert interior.max() <= 1e-6

    def test_scaled_maximum(self, scaled_metric, settings):
        profile = candidate_profile(scaled_metric, 256, settings)
        assert profile.area.max() == pytest.approx(FOUR_PI / 1.44, rel=1e-10)

    def test_rows_layout(self, round_profile):
        row = round_profile.rows()[1]
        assert len(row) == 6
        assert row[4] in ("north", "south")

    def test_needs_closed_metric(self, hemisphere_metric, settings):
        with pytest.raises(OutOfDomain):
            candidate_profile(hemisphere_metric, 256, settings)

    def test_grid_minimum(self, round_metric, settings):
        with pytest.raises(ValueError, match="128"):
            candidate_profile(round_metric, 64, settings)

    def test_odd_grid_rounds_up(self, settings):
        metric = build_metric(ScaledSpec(lam=1.5), settings)
        assert len(candidate_profile(metric, 129, settings)) == 131

    def test_grid_refinement_agrees(self, round_metric, round_profile, settings):
        fine = candidate_profile(round_metric, 1024, settings)
        np.testing.assert_allclose(fine.area[::2], round_profile.area, rtol=1e-9, atol=1e-12)


class TestFiniteDifferences:
    def test_second_difference_of_quadratic(self):
        v = np.array([0.0, 0.5, 1.5, 2.0, 3.5])
        values = 3.0 * v**2 - v + 1.0
        second = central_second_difference(v, values)
        assert np.isnan(second[0]) and np.isnan(second[-1])
        np.testing.assert_allclose(second[1:-1], 6.0, rtol=1e-12)
