"""
Axially symmetric CMC competitors by shooting from the rotation axis.

The profile curve lives in the quotient half-plane with metric
dr² + f(r)² dθ² and revolution weight y = f(r) sin θ. With φ the angle of
the unit tangent against ∂r:

    r′ = cos φ,   θ′ = sin φ / f,
    φ′ = H − 2 (f′/f) sin φ + cos φ cot θ / f.

H is the divergence of the unit normal that points toward larger r at the
start point, so coordinate spheres about the north pole have H = 2f′/f and
spheres started on their north side see a negative H.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Literal, Optional

import numpy as np
from scipy import optimize
from scipy.integrate import solve_ivp

from app.config import Settings, get_settings
from app.exceptions import DomainEscape, HypothesisFailure, NoBracket, NumericalFailure, OutOfDomain, StepLimit
from app.lab.geodesic_balls import ProfileTable, candidate_area_at, volume_of_ball
from app.lab.warp_metric import WarpedMetric, verify_hypotheses
from app.schemas import CompetitorRecord, CompetitorReport, HypothesisReport, Pole

logger = logging.getLogger(__name__)

START_ARC_FRACTION = 1e-4
CUT_FRACTION = 1e-3
GUARD_FRACTION = 1e-6
MAX_ARCLENGTH_FACTOR = 2.0 * math.pi
SECANT_ITERATIONS = 30
SCAN_POINTS = 25
H_GRID_POINTS = 3
H_GRID_SPAN = 0.8
START_FRACTIONS = (0.15, 0.5, 0.85)
COORDINATE_SPHERE_TOL = 1e-6

# State vector: r, θ, φ, area, volume, F with F(r) = ∫₀ʳ f²
R, THETA, PHI, AREA, VOLUME, F = range(6)


@dataclass
class CMCSolution:
    h: float
    start: tuple[float, float]
    arclength: np.ndarray
    r: np.ndarray
    theta: np.ndarray
    cum_area: np.ndarray
    cum_volume: np.ndarray
    area: float
    enclosed_volume: float
    closure_residual: float
    closed: bool
    end_axis: Literal["zero", "pi"]
    speed_defect: float

    def rows(self) -> list[list[float]]:
        return [
            [s, r, t, a, v]
            for s, r, t, a, v in zip(self.arclength, self.r, self.theta, self.cum_area, self.cum_volume)
        ]


# ── Shooting ─────────────────────────────────────────────────────────────────


class _Shot:
    """One integration of the CMC system from an axis point at θ = 0."""

    def __init__(self, metric: WarpedMetric, r0: float, h: float, settings: Settings):
        self.metric = metric
        self.r0 = r0
        self.h = h
        self.settings = settings
        self.guard = GUARD_FRACTION * metric.length

    def rhs(self, _s, state):
        r, theta, phi, _, _, big_f = state
        f, df = self.metric.derivatives(r)[:2]
        sin_phi, cos_phi = math.sin(phi), math.cos(phi)
        return [
            cos_phi,
            sin_phi / f,
            self.h - 2.0 * (df / f) * sin_phi + cos_phi / (math.tan(theta) * f),
            2.0 * math.pi * f * math.sin(theta),
            2.0 * math.pi * big_f * math.sin(theta) * sin_phi / f,
            f * f * cos_phi,
        ]

    def weight_slope(self, _s, state) -> float:
        """dy/ds for y = f sin θ."""
        r, theta, phi = state[R], state[THETA], state[PHI]
        f, df = self.metric.derivatives(r)[:2]
        return df * math.sin(theta) * math.cos(phi) + math.cos(theta) * math.sin(phi)

    def weight(self, state) -> float:
        return float(self.metric.f(state[R])) * math.sin(state[THETA])

    def initial_state(self) -> tuple[float, np.ndarray, float]:
        """Umbilic cap of geodesic curvature H/2 − f′/f over a short arc."""
        f, df = self.metric.derivatives(self.r0)[:2]
        k0 = self.h / 2.0 - df / f
        s0 = START_ARC_FRACTION * self.metric.length
        if self.h != 0.0:
            s0 = min(s0, 1e-3 * 2.0 / abs(self.h))
        big_f = volume_of_ball(self.metric, self.r0, Pole.NORTH, self.settings) / (4.0 * math.pi)
        state = np.array(
            [
                self.r0 - k0 * s0**2 / 2.0,
                s0 / f,
                math.pi / 2.0 + k0 * s0,
                math.pi * s0**2,
                math.pi * big_f * s0**2 / f**2,
                big_f - f * f * k0 * s0**2 / 2.0,
            ]
        )
        return s0, state, big_f

    def _events(self, phase: int, y_max: float):
        def near_north(_s, state):
            return state[R] - self.guard

        def near_south(_s, state):
            return self.metric.length - self.guard - state[R]

        near_north.terminal = near_south.terminal = True

        if phase == 1:

            def equator(s, state):
                return self.weight_slope(s, state)

            equator.terminal, equator.direction = True, -1
            return [equator, near_north, near_south]

        def cut(_s, state):
            return self.weight(state) - CUT_FRACTION * y_max

        def turn(s, state):
            return self.weight_slope(s, state)

        cut.terminal, cut.direction = True, -1
        turn.terminal, turn.direction = True, 1
        return [cut, turn, near_north, near_south]

    def _integrate(self, s_start: float, state: np.ndarray, phase: int, y_max: float):
        s_max = MAX_ARCLENGTH_FACTOR * self.metric.length
        solution = solve_ivp(
            self.rhs,
            (s_start, s_max),
            state,
            method="DOP853",
            events=self._events(phase, y_max),
            rtol=self.settings.ode_tolerance,
            atol=self.settings.ode_tolerance * 1e-2,
            max_step=0.02 * self.metric.length,
        )
        if solution.status == -1:
            raise StepLimit(f"CMC integration failed: {solution.message}")
        if solution.status == 0:
            raise StepLimit(f"CMC curve did not return to the axis within arclength {s_max:.4g}")
        guards = solution.t_events[-2:]
        if any(len(hits) for hits in guards):
            raise DomainEscape(f"CMC curve from r0 = {self.r0:.6g} with H = {self.h:.6g} reached a pole")
        return solution

    def run(self):
        s0, state, big_f = self.initial_state()
        first = self._integrate(s0, state, phase=1, y_max=math.inf)
        y_max = self.weight(first.y[:, -1])
        second = self._integrate(first.t[-1], first.y[:, -1], phase=2, y_max=y_max)

        arclength = np.concatenate([[0.0, s0], first.t[1:], second.t[1:]])
        start = np.array([self.r0, 0.0, math.pi / 2.0, 0.0, 0.0, big_f])
        states = np.column_stack([start, first.y, second.y[:, 1:]])
        return arclength, states, y_max


def _closure(metric: WarpedMetric, h: float, end: np.ndarray, y_max: float):
    """Residual of the smooth-cap condition at the terminal cut, and the cap corrections.

    Near the axis a smooth closing has cos φ = ±(H/2 ∓ f′/f)·y to third order.
    The mismatch is scaled by y/y_max, the coefficient of the singular mode.
    """
    r, theta, phi, area, volume, big_f = end
    f, df = metric.derivatives(r)[:2]
    y = f * math.sin(theta)
    if theta > math.pi / 2.0:
        end_axis = "pi"
        mismatch = math.cos(phi) - (h / 2.0 - df / f) * y
        volume += 2.0 * math.pi * big_f * (1.0 + math.cos(theta))
    else:
        end_axis = "zero"
        mismatch = math.cos(phi) + (h / 2.0 + df / f) * y
        volume -= 2.0 * math.pi * big_f * (1.0 - math.cos(theta))
    area += math.pi * y**2
    return (y / y_max) * mismatch, area, abs(volume), end_axis


def shoot_cmc(
    metric: WarpedMetric,
    start: tuple[float, float],
    h: float,
    settings: Optional[Settings] = None,
) -> CMCSolution:
    """Integrate from the axis point `start` = (r0, θ0), θ0 ∈ {0, π}, to the next axis crossing."""
    settings = settings or get_settings()
    r0, theta0 = start
    if not 0.0 < r0 < metric.length:
        raise OutOfDomain(f"Start radius {r0} outside (0, {metric.length})")
    if theta0 not in (0.0, math.pi):
        raise OutOfDomain(f"Start point must lie on the axis, got θ0 = {theta0}")

    shot = _Shot(metric, r0, h, settings)
    arclength, states, y_max = shot.run()
    residual, area, volume, end_axis = _closure(metric, h, states[:, -1], y_max)

    theta = states[THETA]
    if theta0 == math.pi:
        # Mirror image under θ ↦ π − θ, an isometry of every warped metric
        theta = math.pi - theta
        end_axis = "zero" if end_axis == "pi" else "pi"

    # |(r′, f θ′)| along the interior samples; the axis point has θ = 0
    tangents = np.array([shot.rhs(0.0, state)[:2] for state in states[:, 1:].T])
    speed = tangents[:, 0] ** 2 + (metric.f(states[R, 1:]) * tangents[:, 1]) ** 2
    solution = CMCSolution(
        h=h,
        start=(r0, theta0),
        arclength=arclength,
        r=states[R],
        theta=theta,
        cum_area=states[AREA],
        cum_volume=states[VOLUME],
        area=area,
        enclosed_volume=volume,
        closure_residual=residual,
        closed=abs(residual) < settings.cmc_closure_tolerance,
        end_axis=end_axis,
        speed_defect=float(np.max(np.abs(speed - 1.0))),
    )
    logger.debug(
        f"Shot r0 = {r0:.8g}, H = {h:.6g}: residual {residual:.3e}, area {area:.10g}, volume {volume:.10g}"
    )
    return solution


# ── Root finding ─────────────────────────────────────────────────────────────


def find_closed_cmc(
    metric: WarpedMetric,
    h: float,
    r0_init: float,
    theta0: float = 0.0,
    settings: Optional[Settings] = None,
) -> CMCSolution:
    """Drive the closure residual to zero in r0: secant first, then scan and bracket."""
    settings = settings or get_settings()
    tol = settings.cmc_closure_tolerance
    cache: dict[float, Optional[CMCSolution]] = {}

    def attempt(r0: float) -> Optional[CMCSolution]:
        if r0 not in cache:
            try:
                cache[r0] = shoot_cmc(metric, (r0, theta0), h, settings)
            except NumericalFailure as exc:
                logger.debug(f"Shot from r0 = {r0:.8g} failed: {exc}")
                cache[r0] = None
        return cache[r0]

    # Secant
    a, b = r0_init, r0_init + 1e-3 * metric.length
    shot_a = attempt(a)
    if shot_a is not None and shot_a.closed:
        return shot_a
    shot_b = attempt(b) if b < metric.length else None
    for _ in range(SECANT_ITERATIONS):
        if shot_a is None or shot_b is None:
            break
        if shot_b.closed:
            return shot_b
        denominator = shot_b.closure_residual - shot_a.closure_residual
        if denominator == 0.0:
            break
        c = b - shot_b.closure_residual * (b - a) / denominator
        if not 0.0 < c < metric.length:
            break
        a, shot_a = b, shot_b
        b, shot_b = c, attempt(c)

    logger.warning(f"Secant on r0 did not converge for H = {h:.6g}; scanning for a bracket")

    # Scan and bracket
    margin = 1e-3 * metric.length
    grid = np.linspace(margin, metric.length - margin, SCAN_POINTS)
    values = [(float(r), attempt(float(r))) for r in grid]
    valid = [(r, s.closure_residual) for r, s in values if s is not None]
    brackets = [(lo, hi) for (lo, f_lo), (hi, f_hi) in zip(valid, valid[1:]) if f_lo * f_hi <= 0.0]
    if not brackets:
        raise NoBracket(f"No sign change of the closure residual for H = {h:.6g} on (0, {metric.length:.6g})")

    lo, hi = min(brackets, key=lambda pair: abs(0.5 * (pair[0] + pair[1]) - r0_init))

    def residual(r0: float) -> float:
        shot = attempt(r0)
        if shot is None:
            raise NoBracket(f"Shot failed inside the bracket at r0 = {r0:.8g}")
        return shot.closure_residual

    root = optimize.brentq(residual, lo, hi, xtol=1e-13)
    solution = attempt(root)
    if solution is None:
        raise NoBracket(f"Shot failed at the bracketed root r0 = {root:.10g}")
    if not solution.closed:
        logger.warning(f"Bracketed root at r0 = {root:.10g} leaves residual {solution.closure_residual:.3e}")
    return solution


# ── Competitor comparison ────────────────────────────────────────────────────


def h_grid(metric: WarpedMetric, target: float, settings: Optional[Settings] = None) -> list[float]:
    """Mean curvatures to sweep for competitors enclosing about `target`.

    The coordinate spheres at target·(1 + t) for t across the volume window
    fix the magnitudes; both signs are kept because a sphere started on its
    north side sees −H.
    """
    settings = settings or get_settings()
    match = settings.cmc_volume_match
    total = metric.total_volume
    magnitudes = set()
    for t in np.linspace(-H_GRID_SPAN * match, H_GRID_SPAN * match, H_GRID_POINTS):
        volume = min(max(target * (1.0 + t), 1e-12 * total), (1.0 - 1e-12) * total)
        magnitudes.add(round(abs(candidate_area_at(metric, volume, settings).mean_curvature), 12))
    return sorted({sign * h for h in magnitudes for sign in (1.0, -1.0)})


def is_coordinate_sphere(solution: CMCSolution, metric: WarpedMetric) -> bool:
    """A level set of r, i.e. one of the candidate spheres themselves."""
    return float(np.ptp(solution.r)) <= COORDINATE_SPHERE_TOL * metric.length


def compare_with_profile(
    metric: WarpedMetric,
    profile: ProfileTable,
    volumes: Iterable[float],
    hypotheses: Optional[HypothesisReport] = None,
    settings: Optional[Settings] = None,
) -> CompetitorReport:
    """Sweep H and start points for closed CMC spheres near each target volume and compare with I(V)."""
    settings = settings or get_settings()
    hypotheses = hypotheses or verify_hypotheses(metric, settings=settings)
    if not hypotheses.passed:
        raise HypothesisFailure(f"{metric.name} fails the curvature hypotheses")

    total = profile.total_volume
    starts = [fraction * metric.length for fraction in START_FRACTIONS]
    records = []
    for target in volumes:
        candidate = candidate_area_at(metric, target, settings)
        competitors = []
        for h in h_grid(metric, target, settings):
            for r0 in starts:
                try:
                    solution = find_closed_cmc(metric, h, r0, settings=settings)
                except NumericalFailure as exc:
                    logger.debug(f"No closed CMC for H = {h:.6g} from r0 = {r0:.6g}: {exc}")
                    continue
                if not solution.closed or is_coordinate_sphere(solution, metric):
                    continue
                for enclosed in (solution.enclosed_volume, total - solution.enclosed_volume):
                    if abs(enclosed - target) <= settings.cmc_volume_match * target:
                        competitors.append((solution.area, enclosed))

        record = CompetitorRecord(
            target_volume=target, candidate_area=candidate.area, competitor_count=len(competitors)
        )
        if competitors:
            area, volume = min(competitors)
            at_competitor = candidate_area_at(metric, volume, settings).area
            record = record.model_copy(
                update={
                    "min_competitor_area": area,
                    "min_competitor_volume": volume,
                    "profile_at_competitor": at_competitor,
                    "beaten": area < at_competitor * (1.0 - settings.competitor_margin),
                }
            )
        records.append(record)
        logger.info(
            f"V = {target:.6g}: {record.competitor_count} competitor(s), "
            f"candidate {candidate.area:.8g}, best {record.min_competitor_area}"
        )

    beaten = [r for r in records if r.beaten]
    if beaten:
        summary = "competitor below the candidate profile at V = " + ", ".join(
            f"{r.target_volume:.6g}" for r in beaten
        )
    else:
        summary = f"no competitor found below the candidate profile at {len(records)} sampled volume(s)"
    return CompetitorReport(records=records, any_beaten=bool(beaten), summary=summary)
