"""
Rotationally symmetric metrics dr² + f(r)² g_S² on [0, L].

Builds and validates warping functions, evaluates curvature (with a series
path near the poles), checks the R ≥ 6 / Ric > 0 hypotheses and performs the
doubling construction across a totally geodesic boundary.
"""

from __future__ import annotations

import logging
import math
from functools import cached_property
from typing import Callable, Literal, Optional

import numpy as np
from numpy.polynomial import Polynomial
from scipy import integrate

from app.config import Settings, get_settings
from app.exceptions import (
    GeometryViolation,
    MalformedSpec,
    NotTotallyGeodesic,
    OutOfDomain,
    SeamPole,
)
from app.schemas import (
    CurvatureData,
    HemisphereSpec,
    HypothesisReport,
    Pole,
    RoundSpec,
    ScaledSpec,
    SeamSample,
    SeriesSpec,
    Violation,
)

logger = logging.getLogger(__name__)

Evaluator = Callable[[np.ndarray], np.ndarray]

# Taylor terms kept for sine-type presets inside the pole window
SINE_TERMS = 12
VALIDATION_NODES = 2048
MIN_CURVATURE_GRID = 64

# f^(k)(2L − r) = (−1)^k f^(k)(r) under reflection
_REFLECTION_SIGNS = np.array([1.0, -1.0, 1.0, -1.0, 1.0])[:, None]


# ── Evaluators ───────────────────────────────────────────────────────────────


def _sine_evaluator(lam: float) -> Evaluator:
    def evaluate(r: np.ndarray) -> np.ndarray:
        x = lam * r
        s, c = np.sin(x), np.cos(x)
        return np.stack([s / lam, c, -lam * s, -lam**2 * c, lam**3 * s])

    return evaluate


def _sine_series(lam: float) -> np.ndarray:
    """Odd Taylor coefficients of sin(λr)/λ: a1, a3, a5, ..."""
    return np.array(
        [(-1) ** k * lam ** (2 * k) / math.factorial(2 * k + 1) for k in range(SINE_TERMS)]
    )


def _polynomial_evaluator(poly: Polynomial) -> Evaluator:
    chain = [poly] + [poly.deriv(k) for k in range(1, 5)]

    def evaluate(r: np.ndarray) -> np.ndarray:
        return np.stack([np.broadcast_to(p(r), r.shape) for p in chain])

    return evaluate


def _reflected_evaluator(base: Evaluator, seam: float) -> Evaluator:
    def evaluate(r: np.ndarray) -> np.ndarray:
        mirrored = r > seam
        local = np.where(mirrored, 2.0 * seam - r, r)
        values = base(local)
        return np.where(mirrored, values * _REFLECTION_SIGNS, values)

    return evaluate


# ── Metric ───────────────────────────────────────────────────────────────────


class WarpedMetric:
    """Validated warping function f on [0, L] with analytic derivatives to order 4.

    `north_series` / `south_series` hold the odd Taylor coefficients of f in the
    distance to each pole; they drive curvature evaluation inside the pole
    window where (1 − f′²)/f² is 0/0.
    """

    def __init__(
        self,
        name: str,
        length: float,
        closed: bool,
        evaluator: Evaluator,
        north_series: np.ndarray,
        south_series: Optional[np.ndarray] = None,
        seam: Optional[float] = None,
        base: Optional["WarpedMetric"] = None,
    ):
        self.name = name
        self.length = float(length)
        self.closed = closed
        self._evaluator = evaluator
        self.north_series = np.asarray(north_series, dtype=float)
        self.south_series = None if south_series is None else np.asarray(south_series, dtype=float)
        self.seam = seam
        self.base = base

    def __repr__(self):
        return f"<WarpedMetric({self.name}, L={self.length:.6g}, closed={self.closed})>"

    def derivatives(self, r) -> np.ndarray:
        """(f, f′, f″, f‴, f⁗) at r; shape (5,) for scalar r, (5, n) otherwise."""
        r_arr = np.atleast_1d(np.asarray(r, dtype=float))
        values = self._evaluator(r_arr)
        return values[:, 0] if np.ndim(r) == 0 else values

    def f(self, r):
        return self.derivatives(r)[0]

    def one_sided(self, r: float, side: Literal["left", "right"]) -> tuple[np.ndarray, bool]:
        """Derivatives at r from one side; the flag is True when r is the seam."""
        if self.seam is None or not math.isclose(r, self.seam, rel_tol=0.0, abs_tol=1e-12):
            return self.derivatives(r), False
        left = self.base.derivatives(self.seam)
        if side == "left":
            return left, True
        return left * _REFLECTION_SIGNS[:, 0], True

    @cached_property
    def total_volume(self) -> float:
        points = [self.seam] if self.seam is not None else None
        value, _ = integrate.quad(
            lambda t: float(self.f(t)) ** 2,
            0.0,
            self.length,
            points=points,
            epsabs=0.0,
            epsrel=1e-12,
            limit=200,
        )
        return 4.0 * math.pi * value

    def is_smooth_pole(self, pole: Pole) -> bool:
        return pole == Pole.NORTH or self.closed

    def pole_series(self, pole: Pole) -> np.ndarray:
        if not self.is_smooth_pole(pole):
            raise SeamPole(f"{self.name}: r = L is a boundary, which becomes the doubling seam")
        return self.north_series if pole == Pole.NORTH else self.south_series

    def local_radius(self, r, pole: Pole):
        """Coordinate r of the point at distance r from the given pole."""
        return r if pole == Pole.NORTH else self.length - r


# ── Construction ─────────────────────────────────────────────────────────────


def _shifted_odd_series(poly: Polynomial, length: float) -> np.ndarray:
    """Odd Taylor coefficients of ρ ↦ f(L − ρ)."""
    local = poly(Polynomial([length, -1.0]))
    even_part = np.abs(local.coef[0::2]).max(initial=0.0)
    if even_part > 1e-6:
        logger.warning(f"South pole series has even part {even_part:.3e}; metric is not smooth there")
    return local.coef[1::2]


def _sine_metric(name: str, lam: float, closed: bool) -> WarpedMetric:
    if not (math.isfinite(lam) and lam > 0):
        raise MalformedSpec(f"λ must be a positive real, got {lam}")
    length = math.pi / lam if closed else math.pi / (2.0 * lam)
    series = _sine_series(lam)
    return WarpedMetric(
        name=name,
        length=length,
        closed=closed,
        evaluator=_sine_evaluator(lam),
        north_series=series,
        south_series=series if closed else None,
    )


def _series_metric(spec: SeriesSpec) -> WarpedMetric:
    coefficients = np.asarray(spec.coefficients, dtype=float)
    if not np.all(np.isfinite(coefficients)):
        raise MalformedSpec("Series coefficients must be finite")
    if not (math.isfinite(spec.length) and spec.length > 0):
        raise MalformedSpec(f"Series length must be positive, got {spec.length}")

    odd = np.concatenate([[1.0], coefficients])
    powers = 2 * np.arange(odd.size) + 1
    majorant = float(np.sum(np.abs(odd) * spec.length**powers))
    if not math.isfinite(majorant):
        raise MalformedSpec("Series majorant diverges on [0, L]")
    if spec.majorant_bound is not None and majorant > spec.majorant_bound:
        raise MalformedSpec(
            f"Series majorant {majorant:.6g} exceeds the certified bound {spec.majorant_bound:.6g}"
        )

    full = np.zeros(2 * odd.size)
    full[1::2] = odd
    poly = Polynomial(full)
    south = _shifted_odd_series(poly, spec.length) if spec.closed else None
    terms = ", ".join(f"{c:g}" for c in coefficients)
    return WarpedMetric(
        name=f"series([{terms}], L={spec.length:g})",
        length=spec.length,
        closed=spec.closed,
        evaluator=_polynomial_evaluator(poly),
        north_series=odd,
        south_series=south,
    )


def _validate(metric: WarpedMetric, settings: Settings) -> None:
    tol = settings.closure_tolerance
    L = metric.length

    interior = np.linspace(0.0, L, VALIDATION_NODES + 1)[1:-1]
    f = metric.f(interior)
    if np.any(f <= 0):
        bad = interior[np.argmax(f <= 0)]
        raise GeometryViolation(f"{metric.name}: f ≤ 0 in the interior at r = {bad:.6g}")

    f0, df0 = metric.derivatives(0.0)[:2]
    if abs(f0) > tol or abs(df0 - 1.0) > tol:
        raise GeometryViolation(f"{metric.name}: need f(0)=0, f′(0)=1, got {f0:.3e}, {df0:.6g}")

    fL, dfL = metric.derivatives(L)[:2]
    if metric.closed:
        if abs(dfL + 1.0) > tol:
            raise GeometryViolation(f"{metric.name}: closed metric needs f′(L) = −1, got {dfL:.6g}")
        if abs(fL) > tol:
            raise GeometryViolation(f"{metric.name}: closed metric needs f(L) = 0, got {fL:.6g}")
    elif fL <= 0:
        raise GeometryViolation(f"{metric.name}: boundary needs f(L) > 0, got {fL:.6g}")


def build_metric(spec, settings: Optional[Settings] = None) -> WarpedMetric:
    """Build and validate a metric from a warping specification."""
    settings = settings or get_settings()

    if isinstance(spec, RoundSpec):
        metric = _sine_metric("round", 1.0, closed=True)
    elif isinstance(spec, ScaledSpec):
        metric = _sine_metric(f"scaled({spec.lam:g})", spec.lam, closed=True)
    elif isinstance(spec, HemisphereSpec):
        metric = _sine_metric(f"hemisphere({spec.lam:g})", spec.lam, closed=False)
    elif isinstance(spec, SeriesSpec):
        metric = _series_metric(spec)
    else:
        raise MalformedSpec(f"Unknown warping specification: {spec!r}")

    _validate(metric, settings)
    logger.info(f"Built {metric!r}, total volume {metric.total_volume:.12g}")
    return metric


# ── Curvature ────────────────────────────────────────────────────────────────


def _generic_ratios(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(f″/f, (1 − f′²)/f²) straight from the derivatives."""
    f, df, d2f = values[0], values[1], values[2]
    return d2f / f, (1.0 - df**2) / f**2


def _series_ratios(odd: np.ndarray, rho: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Same ratios from f(ρ) = ρ g(ρ²), free of cancellation at ρ → 0.

    With u = ρ²: f″/f = (6g′ + 4u g″)/g and, writing h = g + 2u g′ = f′,
    (1 − f′²)/f² = −((h − 1)/u)(h + 1)/g².
    """
    g = Polynomial(odd)
    dg, d2g = g.deriv(), g.deriv(2)
    h = g + 2 * Polynomial([0.0, 1.0]) * dg
    q = Polynomial(h.coef[1:]) if h.coef.size > 1 else Polynomial([0.0])

    u = np.asarray(rho, dtype=float) ** 2
    gu = g(u)
    second = (6.0 * dg(u) + 4.0 * u * d2g(u)) / gu
    first = -q(u) * (h(u) + 1.0) / gu**2
    return second, first


def _ricci_from_ratios(second, first) -> tuple[np.ndarray, np.ndarray]:
    ric_radial = -2.0 * second
    ric_tangential = -second + first
    return ric_radial, ric_tangential


def curvature_arrays(
    metric: WarpedMetric, r, settings: Optional[Settings] = None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized (scalar, ricRadial, ricTangential) on an array of radii."""
    settings = settings or get_settings()
    r = np.atleast_1d(np.asarray(r, dtype=float))
    window = settings.pole_window_fraction * metric.length

    near_north = r < window
    near_south = (metric.length - r < window) & metric.closed & ~near_north
    generic = ~(near_north | near_south)

    second = np.empty_like(r)
    first = np.empty_like(r)
    if generic.any():
        second[generic], first[generic] = _generic_ratios(metric.derivatives(r[generic]))
    if near_north.any():
        second[near_north], first[near_north] = _series_ratios(metric.north_series, r[near_north])
    if near_south.any():
        second[near_south], first[near_south] = _series_ratios(
            metric.south_series, metric.length - r[near_south]
        )

    ric_radial, ric_tangential = _ricci_from_ratios(second, first)
    return ric_radial + 2.0 * ric_tangential, ric_radial, ric_tangential


def curvature_at(metric: WarpedMetric, r: float, settings: Optional[Settings] = None) -> CurvatureData:
    if not 0.0 <= r <= metric.length:
        raise OutOfDomain(f"r = {r} outside [0, {metric.length}]")
    scalar, radial, tangential = curvature_arrays(metric, [r], settings)
    return CurvatureData(
        r=r,
        scalar=float(scalar[0]),
        ric_radial=float(radial[0]),
        ric_tangential=float(tangential[0]),
    )


def scalar_from_series(odd: np.ndarray, rho) -> np.ndarray:
    """Scalar curvature at distance ρ from a pole using its Taylor data."""
    radial, tangential = _ricci_from_ratios(*_series_ratios(odd, rho))
    return radial + 2.0 * tangential


def _seam_samples(metric: WarpedMetric) -> list[SeamSample]:
    samples = []
    for side in ("left", "right"):
        values, _ = metric.one_sided(metric.seam, side)
        radial, tangential = _ricci_from_ratios(*_generic_ratios(values[:, None]))
        samples.append(
            SeamSample(
                side=side,
                r=metric.seam,
                scalar=float(radial[0] + 2.0 * tangential[0]),
                ric_radial=float(radial[0]),
                ric_tangential=float(tangential[0]),
            )
        )
    return samples


def verify_hypotheses(
    metric: WarpedMetric,
    grid_size: Optional[int] = None,
    settings: Optional[Settings] = None,
) -> HypothesisReport:
    """Sample curvature on a uniform grid and check R ≥ 6 and Ric > 0."""
    settings = settings or get_settings()
    grid_size = grid_size or settings.curvature_size
    if grid_size < MIN_CURVATURE_GRID:
        raise ValueError(f"gridSize must be at least {MIN_CURVATURE_GRID}, got {grid_size}")

    radii = np.linspace(0.0, metric.length, grid_size + 1)
    seam_samples: list[SeamSample] = []
    if metric.seam is not None:
        notch = settings.seam_notch_fraction * metric.length
        radii = radii[np.abs(radii - metric.seam) >= notch]
        seam_samples = _seam_samples(metric)

    scalar, radial, tangential = curvature_arrays(metric, radii, settings)
    ricci = np.minimum(radial, tangential)

    scalar_bad = scalar < 6.0 - settings.scalar_slack
    ricci_bad = ricci <= 0.0
    violations = [
        Violation(r=float(r), quantity="scalar", value=float(v))
        for r, v in zip(radii[scalar_bad], scalar[scalar_bad])
    ] + [
        Violation(r=float(r), quantity="ricci", value=float(v))
        for r, v in zip(radii[ricci_bad], ricci[ricci_bad])
    ]

    report = HypothesisReport(
        scalar_ok=not scalar_bad.any(),
        ricci_ok=not ricci_bad.any(),
        min_scalar=float(scalar.min()),
        min_ricci_eigenvalue=float(ricci.min()),
        violations=violations,
        seam_samples=seam_samples,
        grid_size=grid_size,
    )
    logger.info(
        f"Hypotheses on {metric.name}: min R = {report.min_scalar:.10g}, "
        f"min Ric = {report.min_ricci_eigenvalue:.10g}, {len(violations)} violation(s)"
    )
    return report


# ── Doubling and pole data ───────────────────────────────────────────────────


def double(metric: WarpedMetric, settings: Optional[Settings] = None) -> WarpedMetric:
    """Reflect a metric with totally geodesic boundary across r = L."""
    settings = settings or get_settings()
    if metric.closed:
        raise NotTotallyGeodesic(f"{metric.name} is closed; there is no boundary to double across")

    slope = float(metric.derivatives(metric.length)[1])
    if abs(slope) > settings.totally_geodesic_tolerance:
        raise NotTotallyGeodesic(f"{metric.name}: f′(L) = {slope:.3e}, boundary is not totally geodesic")

    doubled = WarpedMetric(
        name=f"double({metric.name})",
        length=2.0 * metric.length,
        closed=True,
        evaluator=_reflected_evaluator(metric._evaluator, metric.length),
        north_series=metric.north_series,
        south_series=metric.north_series,
        seam=metric.length,
        base=metric,
    )
    logger.info(f"Doubled {metric.name} across r = {metric.length:.12g}")
    return doubled


def laplacian_scalar_at_pole(
    metric: WarpedMetric, pole: Pole, levels: int = 5
) -> float:
    """ΔR at a pole: 3·R″(0⁺) by Richardson extrapolation of central differences.

    R is even in the distance ρ to the pole, so the central difference is
    2(R(h) − R(0))/h², with an error series in powers of h².
    """
    odd = metric.pole_series(pole)
    step = 0.1 * metric.length / math.pi
    r0 = float(scalar_from_series(odd, 0.0))

    table: list[list[float]] = []
    for j in range(levels):
        h = step / 2**j
        row = [2.0 * (float(scalar_from_series(odd, h)) - r0) / h**2]
        for k in range(1, j + 1):
            row.append((4**k * row[k - 1] - table[j - 1][k - 1]) / (4**k - 1))
        table.append(row)
    return 3.0 * table[-1][-1]
