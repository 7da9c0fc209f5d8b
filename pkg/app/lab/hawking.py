"""
Adapted Hawking mass along a profile, its monotonicity on the first half,
the rigidity ODE and the inequality ledger on coordinate spheres.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
from scipy.integrate import solve_ivp

from app.config import Settings, get_settings
from app.exceptions import HypothesisFailure, NegativeArea, OutOfDomain, OutOfRange, StiffnessFailure
from app.lab.geodesic_balls import (
    S3_VOLUME,
    ProfileTable,
    candidate_area_at,
    central_second_difference,
    s3_reference_profile,
    sphere_geometry,
    volume_of_ball,
)
from app.lab.warp_metric import WarpedMetric, verify_hypotheses
from app.schemas import (
    HypothesisReport,
    InequalityLedger,
    InequalityRecord,
    MonotonicityVerdict,
    Pole,
    RigidityVerdict,
    S3Agreement,
)

logger = logging.getLogger(__name__)

FOUR_PI = 4.0 * math.pi
SIXTEEN_PI = 16.0 * math.pi


# ── Mass ─────────────────────────────────────────────────────────────────────


def hawking_mass(area: float, iprime: float) -> float:
    """m_H = √I·(16π − 4I − I·I′²)."""
    if area < 0.0:
        raise NegativeArea(f"Profile area must be nonnegative, got {area}")
    if area == 0.0:
        return 0.0
    return math.sqrt(area) * (SIXTEEN_PI - 4.0 * area - area * iprime**2)


def _mass_array(area: np.ndarray, iprime: np.ndarray) -> np.ndarray:
    if np.any(area < 0.0):
        raise NegativeArea(f"Profile area must be nonnegative, min {area.min()}")
    positive = area > 0.0
    mass = np.zeros_like(area)
    a, ip = area[positive], iprime[positive]
    mass[positive] = np.sqrt(a) * (SIXTEEN_PI - 4.0 * a - a * ip**2)
    return mass


def forward_difference(volume: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Δ_δ f(V) = (f(V + δ) − f(V))/δ; undefined at the last node."""
    out = np.full(volume.size, np.nan)
    out[:-1] = np.diff(values) / np.diff(volume)
    return out


@dataclass
class HawkingTable:
    volume: np.ndarray
    area: np.ndarray
    mass: np.ndarray
    derivative: np.ndarray
    total_volume: float
    limit_at_zero: float
    tolerance: float
    monotone_on_first_half: bool = False
    min_derivative: float = math.nan

    def rows(self) -> list[list[float]]:
        return [[v, m, d] for v, m, d in zip(self.volume, self.mass, self.derivative)]


def _limit_at_zero(profile: ProfileTable, mass: np.ndarray) -> float:
    if profile.origin_volume.size >= 2:
        v = profile.origin_volume
        m = _mass_array(profile.origin_area, profile.origin_iprime)
    else:
        first = np.flatnonzero(profile.volume > 0.0)[:3]
        v, m = profile.volume[first], mass[first]
    _, intercept = np.polyfit(v, m, 1)
    return float(intercept)


def hawking_table(profile: ProfileTable, settings: Optional[Settings] = None) -> HawkingTable:
    settings = settings or get_settings()
    mass = _mass_array(profile.area, profile.iprime)
    if not np.all(np.isfinite(mass)):
        raise OutOfRange("Hawking mass is not finite at every node")

    table = HawkingTable(
        volume=profile.volume,
        area=profile.area,
        mass=mass,
        derivative=forward_difference(profile.volume, mass),
        total_volume=profile.total_volume,
        limit_at_zero=_limit_at_zero(profile, mass),
        tolerance=settings.mono_tolerance_factor * max(float(np.ptp(mass)), 1.0),
    )
    verdict = check_monotonicity(table, profile.total_volume)
    table.monotone_on_first_half = verdict.monotone
    table.min_derivative = verdict.min_derivative
    logger.info(
        f"Hawking mass on {profile.metric_name}: range [{mass.min():.6g}, {mass.max():.6g}], "
        f"limit at 0 = {table.limit_at_zero:.3e}, monotone = {verdict.monotone}"
    )
    return table


def check_monotonicity(table: HawkingTable, total_volume: float) -> MonotonicityVerdict:
    """Δ_δ m_H ≥ −tol at every node with V < vol/2, recomputed from (V, m_H)."""
    derivative = forward_difference(table.volume, table.mass)
    first_half = (table.volume < total_volume / 2.0) & np.isfinite(derivative)
    values = derivative[first_half]
    volumes = table.volume[first_half]
    if values.size == 0:
        raise OutOfRange(f"No profile node with V < vol/2 = {total_volume / 2.0:.6g}; monotonicity is undefined")

    worst = int(np.argmin(values))
    monotone = bool(values[worst] >= -table.tolerance)
    area_steps = np.diff(table.area[table.volume <= total_volume / 2.0])

    verdict = MonotonicityVerdict(
        monotone=monotone,
        min_derivative=float(values[worst]),
        violating_volume=None if monotone else float(volumes[worst]),
        tolerance=table.tolerance,
        profile_nondecreasing=bool(np.all(area_steps >= -table.tolerance)),
    )
    if not monotone:
        logger.warning(f"m_H decreases at V = {verdict.violating_volume:.6g} (Δ = {verdict.min_derivative:.3e})")
    return verdict


def s3_agreement(profile: ProfileTable, table: HawkingTable) -> S3Agreement:
    """Where m_H vanishes from V = 0 on, the profile must be the S³ profile."""
    half = profile.volume <= profile.total_volume / 2.0
    vanishing = np.abs(table.mass) <= table.tolerance
    prefix = np.logical_and.accumulate(vanishing & half)
    last = int(np.flatnonzero(prefix)[-1]) if prefix.any() else 0

    nodes = range(last + 1)
    deviation = max(
        (abs(profile.area[k] - s3_reference_profile(min(profile.volume[k], S3_VOLUME))) for k in nodes),
        default=0.0,
    )
    return S3Agreement(vanishing_up_to=float(profile.volume[last]), max_deviation=float(deviation))


# ── Rigidity ODE ─────────────────────────────────────────────────────────────


def rigidity_ode_rhs(area: float) -> float:
    """I′ = √((16π − 4I)/I), the vanishing-mass ODE."""
    if area <= 0.0 or area > FOUR_PI + 1e-12:
        raise OutOfRange(f"Rigidity ODE needs 0 < I ≤ 4π, got {area}")
    return math.sqrt(max(SIXTEEN_PI - 4.0 * area, 0.0) / area)


def _profile_from_samples(volume: np.ndarray, area: np.ndarray, iprime: np.ndarray) -> ProfileTable:
    return ProfileTable(
        metric_name="rigidity-ode",
        total_volume=S3_VOLUME,
        volume=volume,
        area=area,
        iprime=iprime,
        isecond=central_second_difference(volume, area),
        pole=[Pole.NORTH] * volume.size,
        radius=np.arcsin(np.sqrt(np.clip(area / FOUR_PI, 0.0, 1.0))),
    )


def integrate_rigidity_ode(
    v0: float = 1e-3,
    i0: Optional[float] = None,
    v_max: float = math.pi**2,
    samples: int = 513,
    settings: Optional[Settings] = None,
) -> ProfileTable:
    """Integrate dI/dV = √((16π − 4I)/I) from (v0, i0); i0 defaults to the S³ seed."""
    settings = settings or get_settings()
    if i0 is None:
        i0 = s3_reference_profile(v0)
    if not 0.0 < i0 <= FOUR_PI + 1e-12:
        raise OutOfRange(f"Rigidity ODE seed needs 0 < I0 ≤ 4π, got {i0}")
    if v_max <= v0:
        raise OutOfRange(f"Integration range [{v0}, {v_max}] is empty")

    if i0 >= FOUR_PI - 1e-12:
        # Right-hand side vanishes: I stays at 4π
        volume = np.array([v0, v_max])
        return _profile_from_samples(volume, np.full(2, i0), np.zeros(2))

    def rhs(_v, y):
        return [math.sqrt(max(SIXTEEN_PI - 4.0 * y[0], 0.0) / max(y[0], 1e-300))]

    volume = np.linspace(v0, v_max, samples)
    solution = solve_ivp(
        rhs,
        (v0, v_max),
        [i0],
        method="DOP853",
        t_eval=volume,
        rtol=settings.ode_tolerance,
        atol=settings.ode_tolerance * 1e-2,
    )
    if not solution.success:
        raise StiffnessFailure(f"Rigidity ODE failed from V0 = {v0}: {solution.message}")

    area = np.minimum(solution.y[0], FOUR_PI)
    iprime = np.sqrt(np.maximum(SIXTEEN_PI - 4.0 * area, 0.0) / area)
    logger.info(f"Rigidity ODE from V0 = {v0:g}: {solution.nfev} evaluations, I(end) = {area[-1]:.12g}")
    return _profile_from_samples(volume, area, iprime)


def max_isoperimetric_area(profile: ProfileTable, settings: Optional[Settings] = None) -> RigidityVerdict:
    """Max of the profile, the rigidity verdict and a comparison against S³."""
    settings = settings or get_settings()
    max_area = float(np.max(profile.area))
    rigid = max_area >= FOUR_PI - settings.rigid_tolerance

    shared = profile.volume <= S3_VOLUME
    deviation = max(
        abs(a - s3_reference_profile(v)) for v, a in zip(profile.volume[shared], profile.area[shared])
    )
    verdict = RigidityVerdict(
        max_area=max_area,
        rigid=rigid,
        tolerance=settings.rigid_tolerance,
        s3_max_deviation=float(deviation),
        volume_defect=abs(profile.total_volume - S3_VOLUME),
    )
    logger.info(f"Max isoperimetric area {max_area:.10g} (4π = {FOUR_PI:.10g}): rigid = {rigid}")
    return verdict


# ── Inequality ledger ────────────────────────────────────────────────────────


def _profile_second_derivative(metric: WarpedMetric, volume: float, settings: Settings) -> float:
    delta = 1e-3 * min(volume, metric.total_volume - volume)
    below = candidate_area_at(metric, volume - delta, settings).area
    centre = candidate_area_at(metric, volume, settings).area
    above = candidate_area_at(metric, volume + delta, settings).area
    return (above - 2.0 * centre + below) / delta**2


def inequality_ledger(
    metric: WarpedMetric,
    radii: Iterable[float],
    pole: Pole = Pole.NORTH,
    hypotheses: Optional[HypothesisReport] = None,
    settings: Optional[Settings] = None,
) -> InequalityLedger:
    """Bavard–Pansu, basic-estimate and Christodoulou–Yau quantities per coordinate sphere."""
    settings = settings or get_settings()
    hypotheses = hypotheses or verify_hypotheses(metric, settings=settings)
    if not hypotheses.passed:
        raise HypothesisFailure(
            f"{metric.name} fails the curvature hypotheses (min R = {hypotheses.min_scalar:.6g}, "
            f"min Ric = {hypotheses.min_ricci_eigenvalue:.6g})"
        )
    if not metric.closed:
        raise OutOfDomain(f"{metric.name} has boundary; double it before building the ledger")

    records = []
    for r in radii:
        sphere = sphere_geometry(metric, r, pole)
        volume = volume_of_ball(metric, r, pole, settings)
        candidate = candidate_area_at(metric, volume, settings)
        area, slope = candidate.area, candidate.mean_curvature
        isecond = _profile_second_derivative(metric, volume, settings)

        umbilic = sphere.normal_ricci_integral + sphere.area * sphere.second_form_norm_sq
        refined = FOUR_PI / area**2 - 3.0 * slope**2 / (4.0 * area) - sphere.scalar_integral / (2.0 * area**2)
        cy_rhs = sphere.area * sphere.mean_curvature**2 + (2.0 / 3.0) * sphere.scalar_integral

        records.append(
            InequalityRecord(
                r=r,
                volume=volume,
                area=area,
                mean_curvature=slope,
                isecond=isecond,
                basic_lhs=isecond * area**2 + umbilic,
                refined_bound=refined,
                monotonicity_bound=FOUR_PI / area**2 - 3.0 * slope**2 / (4.0 * area) - 3.0 / area,
                gauss_bonnet_gap=refined + umbilic / area**2,
                cy_lhs=SIXTEEN_PI,
                cy_rhs=cy_rhs,
                cy_slack=SIXTEEN_PI - cy_rhs,
                realized=sphere.area <= area * (1.0 + 1e-9),
            )
        )
        logger.debug(f"Ledger r = {r:.6g}: basic LHS {records[-1].basic_lhs:.3e}, CY slack {records[-1].cy_slack:.3e}")

    return InequalityLedger(pole=pole, records=records)
