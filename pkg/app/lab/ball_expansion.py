"""
Small-ball expansions at a pole.

vol B(p, r) = (4π/3) r³ (1 + c1 r² + c2 r⁴ + O(r⁶)) with c1 = −R/30 and
c2 = (4R² − 2|Ric|² − 9ΔR)/6300, both analytically and by weighted least
squares, plus the pointwise curvature bounds of the rigidity argument.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

import numpy as np

from app.config import Settings, get_settings
from app.exceptions import HypothesisFailure, IllConditionedFit, MalformedConfig, OutOfRange, PreconditionNotRigid
from app.lab.geodesic_balls import (
    ProfileTable,
    candidate_area_at,
    candidate_profile,
    s3_reference_profile,
    volume_of_ball,
)
from app.lab.hawking import max_isoperimetric_area
from app.lab.warp_metric import WarpedMetric, curvature_at, laplacian_scalar_at_pole, verify_hypotheses
from app.schemas import (
    ExpansionReport,
    FitWindow,
    HypothesisReport,
    Pole,
    ProfileSource,
    RicciBoundReport,
    ScalarBoundComparison,
    ScalarBoundReport,
)

logger = logging.getLogger(__name__)

Number = Union[float, Fraction]

MAX_WINDOW_FRACTION = 0.3
DEFAULT_WINDOW = (0.02, 0.25)
DEFAULT_WEIGHT_POWER = 6
MAX_CONDITION = 1e12
COMPARISON_RADII = tuple(0.2 * 2.0**-k for k in range(6))


# ── Coefficients ─────────────────────────────────────────────────────────────


def area_coefficient6(c1: Number, c2: Number) -> Number:
    """W⁶ coefficient inside the area expansion: −(11/9)c1² + (5/3)c2."""
    return -Fraction(11, 9) * c1**2 + Fraction(5, 3) * c2


def area_expansion(c1: Number, c2: Number, w: Number) -> Number:
    """4πW²(1 + c1W² + (−11/9 c1² + 5/3 c2)W⁴) with W = (3V/4π)^{1/3}."""
    if w < 0:
        raise OutOfRange(f"W must be nonnegative, got {w}")
    w2 = w * w
    return 4.0 * math.pi * w2 * (1 + c1 * w2 + area_coefficient6(c1, c2) * w2 * w2)


def pole_coordinate(metric: WarpedMetric, pole: Pole) -> float:
    return 0.0 if pole == Pole.NORTH else metric.length


def analytic_coefficients(metric: WarpedMetric, pole: Pole) -> ExpansionReport:
    metric.pole_series(pole)
    curvature = curvature_at(metric, pole_coordinate(metric, pole))
    scalar = curvature.scalar
    ric_norm_sq = curvature.ric_radial**2 + 2.0 * curvature.ric_tangential**2
    laplacian = laplacian_scalar_at_pole(metric, pole)

    c1 = -scalar / 30.0
    c2 = (4.0 * scalar**2 - 2.0 * ric_norm_sq - 9.0 * laplacian) / 6300.0
    return ExpansionReport(
        pole=pole,
        scalar=scalar,
        ric_norm_sq=ric_norm_sq,
        laplacian_scalar=laplacian,
        c1_analytic=c1,
        c2_analytic=c2,
        area_coefficient6=float(area_coefficient6(c1, c2)),
    )


# ── Fitting ──────────────────────────────────────────────────────────────────


@dataclass
class FitSamples:
    radius: np.ndarray
    volume: np.ndarray
    excess: np.ndarray

    def rows(self) -> list[list[float]]:
        return [[r, v, y] for r, v, y in zip(self.radius, self.volume, self.excess)]


def default_window(metric: WarpedMetric, sample_count: int = 40) -> FitWindow:
    lo, hi = DEFAULT_WINDOW
    return FitWindow(r_min=lo * metric.length, r_max=hi * metric.length, sample_count=sample_count)


def fit_samples(
    metric: WarpedMetric, pole: Pole, window: FitWindow, settings: Optional[Settings] = None
) -> FitSamples:
    """y(r) = vol B(p, r)/((4π/3)r³) − 1 on the window."""
    if not 0.0 < window.r_min < window.r_max <= MAX_WINDOW_FRACTION * metric.length * (1.0 + 1e-12):
        raise MalformedConfig(
            f"Fit window ({window.r_min}, {window.r_max}) must satisfy 0 < rMin < rMax ≤ 0.3·L"
        )
    radius = np.linspace(window.r_min, window.r_max, window.sample_count)
    volume = volume_of_ball(metric, radius, pole, settings)
    return FitSamples(radius=radius, volume=volume, excess=volume / (4.0 * math.pi / 3.0 * radius**3) - 1.0)


def fit_coefficients(
    metric: WarpedMetric,
    pole: Pole,
    window: Optional[FitWindow] = None,
    weight_power: float = DEFAULT_WEIGHT_POWER,
    settings: Optional[Settings] = None,
) -> ExpansionReport:
    """Weighted least squares of y against (r², r⁴).

    Rows are scaled by (rMin/r)^weight_power so the O(r⁶) tail at the outer
    end of the window does not bias c2.
    """
    window = window or default_window(metric)
    samples = fit_samples(metric, pole, window, settings)
    r2 = samples.radius**2

    weights = (window.r_min / samples.radius) ** weight_power
    design = np.column_stack([r2, r2**2]) * weights[:, None]
    target = samples.excess * weights

    scale = np.linalg.norm(design, axis=0)
    condition = float(np.linalg.cond(design / scale))
    if not math.isfinite(condition) or condition > MAX_CONDITION:
        raise IllConditionedFit(f"Fit design matrix condition number {condition:.3e} exceeds {MAX_CONDITION:.0e}")

    scaled, *_ = np.linalg.lstsq(design / scale, target, rcond=None)
    c1, c2 = scaled / scale
    residual = float(np.linalg.norm(design @ np.array([c1, c2]) - target))

    report = analytic_coefficients(metric, pole).model_copy(
        update={
            "c1_fitted": float(c1),
            "c2_fitted": float(c2),
            "fit_residual_norm": residual,
            "fit_window": (window.r_min, window.r_max),
            "sample_count": window.sample_count,
        }
    )
    logger.info(
        f"Ball expansion at {pole.value} pole of {metric.name}: "
        f"c1 {report.c1_fitted:.8f} (analytic {report.c1_analytic:.8f}), "
        f"c2 {report.c2_fitted:.8f} (analytic {report.c2_analytic:.8f}), cond {condition:.2e}"
    )
    return report


# ── Rigidity-branch curvature bounds ─────────────────────────────────────────


def _require_rigid_branch(
    metric: WarpedMetric,
    profile: Optional[ProfileTable],
    hypotheses: Optional[HypothesisReport],
    settings: Settings,
) -> ProfileTable:
    hypotheses = hypotheses or verify_hypotheses(metric, settings=settings)
    if not hypotheses.passed:
        raise HypothesisFailure(f"{metric.name} fails the curvature hypotheses")
    profile = profile or candidate_profile(metric, settings=settings)
    verdict = max_isoperimetric_area(profile, settings)
    if verdict.s3_max_deviation > settings.rigid_tolerance or verdict.volume_defect > settings.rigid_tolerance:
        raise PreconditionNotRigid(
            f"{metric.name}: profile deviates from the S³ profile by {verdict.s3_max_deviation:.4g} "
            f"(max area {verdict.max_area:.4f})"
        )
    return profile


def scalar_bound_check(
    metric: WarpedMetric,
    pole: Pole,
    profile_source: ProfileSource = ProfileSource.S3_REFERENCE,
    profile: Optional[ProfileTable] = None,
    hypotheses: Optional[HypothesisReport] = None,
    settings: Optional[Settings] = None,
) -> ScalarBoundReport:
    """Small balls must not beat the profile: c1(p) ≥ −1/5, i.e. R(p) ≤ 6."""
    settings = settings or get_settings()
    _require_rigid_branch(metric, profile, hypotheses, settings)
    analytic = analytic_coefficients(metric, pole)

    comparisons = []
    for w in COMPARISON_RADII:
        volume = 4.0 * math.pi / 3.0 * w**3
        if profile_source == ProfileSource.CANDIDATE:
            profile_area = candidate_area_at(metric, volume, settings).area
        else:
            profile_area = s3_reference_profile(volume)
        ball_area = area_expansion(analytic.c1_analytic, analytic.c2_analytic, w)
        comparisons.append(
            ScalarBoundComparison(
                w=w, volume=volume, ball_area=ball_area, profile_area=profile_area, margin=ball_area - profile_area
            )
        )

    w2 = np.array([c.w**2 for c in comparisons])
    ratio = np.array([(c.profile_area / (4.0 * math.pi * c.w**2) - 1.0) / c.w**2 for c in comparisons])
    implied_c1 = float(np.polyfit(w2, ratio, 2)[-1])
    upper = -30.0 * implied_c1
    slack = upper - analytic.scalar
    tol = settings.einstein_tolerance
    comparison_holds = all(c.margin >= -1e-6 * c.profile_area for c in comparisons)
    scalar_equals_six = abs(analytic.scalar - 6.0) <= tol and slack >= -tol

    report = ScalarBoundReport(
        pole=pole,
        profile_source=profile_source,
        comparisons=comparisons,
        comparison_holds=comparison_holds,
        implied_c1_lower_bound=implied_c1,
        scalar_at_pole=analytic.scalar,
        scalar_upper_bound=upper,
        scalar_slack=slack,
        scalar_equals_six=scalar_equals_six,
        bound_confirmed=scalar_equals_six and comparison_holds,
    )
    if not comparison_holds:
        worst = min(comparisons, key=lambda c: c.margin / c.profile_area)
        logger.warning(
            f"Ball of W = {worst.w:.4g} at the {pole.value} pole beats the profile: margin {worst.margin:.3e}"
        )
    logger.info(
        f"Scalar bound at {pole.value} pole: R = {analytic.scalar:.10g} ≤ {upper:.10g} "
        f"(slack {slack:.2e}), confirmed: {report.bound_confirmed}"
    )
    return report


def ricci_bound_check(
    metric: WarpedMetric,
    pole: Pole,
    scalar_report: Optional[ScalarBoundReport] = None,
    settings: Optional[Settings] = None,
) -> RicciBoundReport:
    """With R = 6 and ΔR = 0 the W⁶ coefficient reads −|Ric|²/1890 − 17/1575.

    The metric's own coefficient −(11/9)c1² + (5/3)c2 is checked against that
    closed form, so the residual picks up any drift in R or ΔR at the pole.
    """
    settings = settings or get_settings()
    tol = settings.einstein_tolerance
    scalar_report = scalar_report or scalar_bound_check(metric, pole, settings=settings)
    if not (scalar_report.scalar_equals_six and scalar_report.bound_confirmed):
        raise PreconditionNotRigid(
            f"Scalar bound not confirmed at the {pole.value} pole (R(p) = {scalar_report.scalar_at_pole:.8g})"
        )

    analytic = analytic_coefficients(metric, pole)
    if abs(analytic.scalar - 6.0) > tol:
        raise PreconditionNotRigid(f"R(p) = {analytic.scalar:.8g} ≠ 6 at the {pole.value} pole")
    if abs(analytic.laplacian_scalar) > tol:
        raise PreconditionNotRigid(f"ΔR(p) = {analytic.laplacian_scalar:.6g} ≠ 0 at the {pole.value} pole")

    q = analytic.ric_norm_sq
    coefficient6 = analytic.area_coefficient6
    identity = -q / 1890.0 - 17.0 / 1575.0

    report = RicciBoundReport(
        pole=pole,
        ric_norm_sq=q,
        laplacian_scalar=analytic.laplacian_scalar,
        area_coefficient6=coefficient6,
        identity_value=identity,
        identity_residual=abs(coefficient6 - identity),
        cauchy_schwarz_floor=analytic.scalar**2 / 3.0,
        bound_holds=q <= 12.0 + tol,
        einstein=abs(q - 12.0) <= tol,
    )
    logger.info(
        f"Ricci bound at {pole.value} pole: |Ric|² = {q:.10g}, identity residual {report.identity_residual:.2e}, "
        f"Einstein = {report.einstein}"
    )
    return report
