"""
Coordinate spheres and balls about the poles, volume inversion and the
candidate isoperimetric profile.

Every quantity here is expressed in ρ, the distance from the chosen pole.
About the south pole the coordinate is L − ρ and odd derivatives of f flip
sign, so one code path serves both poles.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy import optimize

from app.config import Settings, get_settings
from app.exceptions import OutOfDomain, OutOfRange
from app.lab.warp_metric import WarpedMetric, curvature_at
from app.schemas import Pole, SphereGeometry

logger = logging.getLogger(__name__)

GAUSS_NODES = 12
MIN_PROFILE_GRID = 128
S3_VOLUME = 2.0 * math.pi**2

# Sub-grid volumes (as fractions of the grid step) sampled for the V → 0 limit
ORIGIN_FRACTIONS = (1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0)

_ODD_FLIP = np.array([1.0, -1.0, 1.0, -1.0, 1.0])[:, None]
_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(GAUSS_NODES)

# Absolute floor for brentq; the relative tolerance then governs near the poles
_ROOT_XTOL = 1e-300


# ── Local data about a pole ──────────────────────────────────────────────────


def local_derivatives(metric: WarpedMetric, rho, pole: Pole) -> np.ndarray:
    """Derivatives of ρ ↦ f(coordinate of ρ), shape (5, n)."""
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    if pole == Pole.NORTH:
        return metric.derivatives(rho)
    return metric.derivatives(metric.length - rho) * _ODD_FLIP


def _local_f_squared(metric: WarpedMetric, rho: np.ndarray, pole: Pole) -> np.ndarray:
    flat = rho.ravel()
    coordinate = flat if pole == Pole.NORTH else metric.length - flat
    return (metric.f(coordinate) ** 2).reshape(rho.shape)


def sphere_geometry(metric: WarpedMetric, r: float, pole: Pole) -> SphereGeometry:
    """Umbilic data of the sphere at distance r from a pole, normal pointing out of the ball."""
    if not 0.0 < r < metric.length:
        raise OutOfDomain(f"Sphere radius {r} outside (0, {metric.length})")

    f, df, d2f = local_derivatives(metric, r, pole)[:3, 0]
    area = 4.0 * math.pi * f**2
    mean_curvature = 2.0 * df / f
    scalar = curvature_at(metric, float(metric.local_radius(r, pole))).scalar
    return SphereGeometry(
        r=r,
        pole=pole,
        area=area,
        mean_curvature=mean_curvature,
        second_form_norm_sq=mean_curvature**2 / 2.0,
        normal_ricci_integral=area * (-2.0 * d2f / f),
        scalar_integral=area * scalar,
    )


# ── Ball volumes ─────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class _VolumeTable:
    """Cumulative ball volume on a uniform ρ-grid, composite Gauss–Legendre per cell."""

    nodes: np.ndarray
    cumulative: np.ndarray


def _table_intervals(settings: Settings) -> int:
    n = settings.volume_table_intervals
    # Even, so a doubling seam at L/2 is always a node
    return n + (n % 2)


@lru_cache(maxsize=32)
def _volume_table(metric: WarpedMetric, pole: Pole, intervals: int) -> _VolumeTable:
    nodes = np.linspace(0.0, metric.length, intervals + 1)
    left, half = nodes[:-1], np.diff(nodes) / 2.0
    points = left[:, None] + half[:, None] * (_GAUSS_X + 1.0)
    cells = 4.0 * math.pi * (_local_f_squared(metric, points, pole) @ _GAUSS_W) * half
    cumulative = np.concatenate([[0.0], np.cumsum(cells)])
    logger.debug(f"Volume table for {metric.name} ({pole.value}): {intervals} cells")
    return _VolumeTable(nodes=nodes, cumulative=cumulative)


def _ball_volumes(metric: WarpedMetric, rho: np.ndarray, pole: Pole, table: _VolumeTable) -> np.ndarray:
    cell = np.clip(np.searchsorted(table.nodes, rho, side="right") - 1, 0, table.nodes.size - 2)
    start = table.nodes[cell]
    half = (rho - start) / 2.0
    points = start[:, None] + half[:, None] * (_GAUSS_X + 1.0)
    partial = 4.0 * math.pi * (_local_f_squared(metric, points, pole) @ _GAUSS_W) * half
    return table.cumulative[cell] + partial


def volume_of_ball(
    metric: WarpedMetric, r, pole: Pole = Pole.NORTH, settings: Optional[Settings] = None
):
    """V = 4π ∫₀ʳ f² for the ball about a pole; accepts a scalar or an array of radii."""
    settings = settings or get_settings()
    rho = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(rho < 0.0) or np.any(rho > metric.length):
        raise OutOfDomain(f"Ball radius outside [0, {metric.length}]")
    table = _volume_table(metric, pole, _table_intervals(settings))
    volumes = _ball_volumes(metric, rho, pole, table)
    return float(volumes[0]) if np.ndim(r) == 0 else volumes


def radius_for_volume(
    metric: WarpedMetric, volume: float, pole: Pole = Pole.NORTH, settings: Optional[Settings] = None
) -> float:
    """Radius of the ball about `pole` enclosing `volume`; bracketed on one table cell."""
    settings = settings or get_settings()
    total = metric.total_volume
    if volume < -1e-12 * total or volume > total * (1.0 + 1e-12):
        raise OutOfRange(f"Volume {volume} outside [0, {total}]")
    if volume <= 0.0:
        return 0.0
    if volume >= total:
        return metric.length

    table = _volume_table(metric, pole, _table_intervals(settings))
    cell = int(np.clip(np.searchsorted(table.cumulative, volume) - 1, 0, table.nodes.size - 2))
    lo, hi = table.nodes[cell], table.nodes[cell + 1]

    def residual(rho: float) -> float:
        return float(_ball_volumes(metric, np.array([rho]), pole, table)[0]) - volume

    if residual(lo) >= 0.0:
        return float(lo)
    if residual(hi) <= 0.0:
        return float(hi)
    return optimize.brentq(residual, lo, hi, xtol=_ROOT_XTOL)


# ── S³ reference ─────────────────────────────────────────────────────────────


def s3_ball_volume(r: float) -> float:
    """π(2r − sin 2r), by series for small r where the difference cancels."""
    if r < 0.1:
        x = 2.0 * r
        term, total = x**3 / 6.0, 0.0
        k = 1
        while abs(term) > 1e-18 * abs(total) or k == 1:
            total += term
            term *= -(x**2) / ((2 * k + 2) * (2 * k + 3))
            k += 1
        return math.pi * total
    return math.pi * (2.0 * r - math.sin(2.0 * r))


def s3_radius(volume: float) -> float:
    if volume < 0.0 or volume > S3_VOLUME * (1.0 + 1e-12):
        raise OutOfRange(f"Volume {volume} outside [0, 2π²]")
    if volume <= 0.0:
        return 0.0
    if volume >= S3_VOLUME:
        return math.pi
    return optimize.brentq(lambda r: s3_ball_volume(r) - volume, 0.0, math.pi, xtol=_ROOT_XTOL)


def s3_reference_profile(volume: float) -> float:
    """Isoperimetric profile of the unit S³: 4π sin² r with π(2r − sin 2r) = V."""
    if volume >= S3_VOLUME and volume <= S3_VOLUME * (1.0 + 1e-12):
        return 0.0
    return 4.0 * math.pi * math.sin(s3_radius(volume)) ** 2


# ── Candidate profile ────────────────────────────────────────────────────────


@dataclass
class CandidatePoint:
    """Best coordinate sphere enclosing a given volume."""

    volume: float
    area: float
    mean_curvature: float
    pole: Pole
    radius: float


def _sphere_at_volume(metric: WarpedMetric, volume: float, pole: Pole, settings: Settings):
    rho = radius_for_volume(metric, volume, pole, settings)
    if rho <= 0.0:
        return 0.0, math.inf, rho
    if rho >= metric.length:
        return 0.0, -math.inf, rho
    f, df = local_derivatives(metric, rho, pole)[:2, 0]
    return 4.0 * math.pi * f**2, 2.0 * df / f, rho


def candidate_area_at(
    metric: WarpedMetric, volume: float, settings: Optional[Settings] = None
) -> CandidatePoint:
    """min over poles of the coordinate-sphere area enclosing `volume`.

    On a tie the right derivative of the minimum is the smaller of the two
    mean curvatures.
    """
    settings = settings or get_settings()
    north = _sphere_at_volume(metric, volume, Pole.NORTH, settings)
    south = _sphere_at_volume(metric, volume, Pole.SOUTH, settings)

    scale = max(north[0], south[0], 1e-300)
    if abs(north[0] - south[0]) <= 1e-12 * scale:
        return CandidatePoint(volume, north[0], min(north[1], south[1]), Pole.NORTH, north[2])
    if south[0] < north[0]:
        return CandidatePoint(volume, south[0], south[1], Pole.SOUTH, south[2])
    return CandidatePoint(volume, north[0], north[1], Pole.NORTH, north[2])


@dataclass
class ProfileTable:
    """Sampled candidate profile on a uniform V-grid."""

    metric_name: str
    total_volume: float
    volume: np.ndarray
    area: np.ndarray
    iprime: np.ndarray
    isecond: np.ndarray
    pole: list[Pole]
    radius: np.ndarray
    right_difference: Optional[np.ndarray] = None
    pole_switch: Optional[np.ndarray] = None
    origin_volume: np.ndarray = field(default_factory=lambda: np.empty(0))
    origin_area: np.ndarray = field(default_factory=lambda: np.empty(0))
    origin_iprime: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        if self.right_difference is None:
            self.right_difference = right_difference(self.volume, self.area)
        if self.pole_switch is None:
            self.pole_switch = np.zeros(self.volume.size, dtype=bool)

    def __len__(self):
        return self.volume.size

    @property
    def step(self) -> float:
        return float(self.volume[1] - self.volume[0])

    def rows(self) -> list[list]:
        return [
            [v, i, ip, isec, p.value, r]
            for v, i, ip, isec, p, r in zip(
                self.volume, self.area, self.iprime, self.isecond, self.pole, self.radius
            )
        ]


def right_difference(volume: np.ndarray, area: np.ndarray) -> np.ndarray:
    out = np.full(volume.size, np.nan)
    out[:-1] = np.diff(area) / np.diff(volume)
    return out


def central_second_difference(volume: np.ndarray, area: np.ndarray) -> np.ndarray:
    out = np.full(volume.size, np.nan)
    h = np.diff(volume)
    out[1:-1] = 2.0 * (h[:-1] * area[2:] - (h[:-1] + h[1:]) * area[1:-1] + h[1:] * area[:-2]) / (
        h[:-1] * h[1:] * (h[:-1] + h[1:])
    )
    return out


def candidate_profile(
    metric: WarpedMetric, grid_size: Optional[int] = None, settings: Optional[Settings] = None
) -> ProfileTable:
    """Profile over coordinate balls about both poles on a uniform V-grid."""
    settings = settings or get_settings()
    if not metric.closed:
        raise OutOfDomain(f"{metric.name} has boundary; double it before computing a profile")
    grid_size = grid_size or settings.profile_size
    if grid_size < MIN_PROFILE_GRID:
        raise ValueError(f"gridSize must be at least {MIN_PROFILE_GRID}, got {grid_size}")
    intervals = grid_size + (grid_size % 2)

    total = metric.total_volume
    volumes = np.linspace(0.0, total, intervals + 1)
    points = [candidate_area_at(metric, float(v), settings) for v in volumes]

    area = np.array([p.area for p in points])
    area[0] = area[-1] = 0.0
    iprime = np.array([p.mean_curvature for p in points])
    iprime[0], iprime[-1] = math.inf, -math.inf
    poles = [p.pole for p in points]
    switch = np.zeros(volumes.size, dtype=bool)
    for k in range(1, volumes.size - 1):
        switch[k] = poles[k] != poles[k - 1] or poles[k] != poles[k + 1]

    step = volumes[1]
    origin = [candidate_area_at(metric, step * frac, settings) for frac in ORIGIN_FRACTIONS]

    table = ProfileTable(
        metric_name=metric.name,
        total_volume=total,
        volume=volumes,
        area=area,
        iprime=iprime,
        isecond=central_second_difference(volumes, area),
        pole=poles,
        radius=np.array([p.radius for p in points]),
        pole_switch=switch,
        origin_volume=np.array([p.volume for p in origin]),
        origin_area=np.array([p.area for p in origin]),
        origin_iprime=np.array([p.mean_curvature for p in origin]),
    )
    logger.info(
        f"Candidate profile for {metric.name}: {len(table)} nodes, "
        f"max I = {area.max():.12g}, {int(switch.sum())} pole-switch node(s)"
    )
    return table
