"""
Pydantic schemas: the single source of truth for all data contracts.

RunConfig is the handoff contract between the CLI and LabService.
Report models are serialized as JSON verdict documents.
"""

from __future__ import annotations

import enum
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

from pydantic import BaseModel, Field, field_validator


# ── Enums ────────────────────────────────────────────────────────────────────


class Pole(str, enum.Enum):
    NORTH = "north"
    SOUTH = "south"


class ProfileSource(str, enum.Enum):
    CANDIDATE = "candidate"
    S3_REFERENCE = "s3Reference"


class Command(str, enum.Enum):
    CURVATURE = "curvature"
    PROFILE = "profile"
    HAWKING = "hawking"
    RIGIDITY = "rigidity"
    EXPANSION = "expansion"
    INEQUALITIES = "inequalities"
    DOUBLE = "double"
    CMC = "cmc"
    FULL_REPORT = "full-report"


# ── Warping specifications ───────────────────────────────────────────────────


class RoundSpec(BaseModel):
    """f(r) = sin r on [0, π]."""

    kind: Literal["round"] = "round"


class ScaledSpec(BaseModel):
    """f(r) = sin(λr)/λ on [0, π/λ]."""

    kind: Literal["scaled"] = "scaled"
    lam: float


class HemisphereSpec(BaseModel):
    """f(r) = sin(λr)/λ on [0, π/(2λ)], boundary at the equator."""

    kind: Literal["hemisphere"] = "hemisphere"
    lam: float = 1.0


class SeriesSpec(BaseModel):
    """f(r) = r + f3 r³ + f5 r⁵ + ... on [0, length]."""

    kind: Literal["series"] = "series"
    coefficients: list[float] = Field(description="f3, f5, f7, ... in order")
    length: float
    closed: bool = True
    majorant_bound: Optional[float] = Field(
        default=None,
        description="Upper bound certified for the majorant Σ|f_k| L^k",
    )


WarpingSpec = Annotated[
    Union[RoundSpec, ScaledSpec, HemisphereSpec, SeriesSpec],
    Field(discriminator="kind"),
]


# ── Curvature ────────────────────────────────────────────────────────────────


class CurvatureData(BaseModel):
    r: float
    scalar: float
    ric_radial: float
    ric_tangential: float


class Violation(BaseModel):
    r: float
    quantity: Literal["scalar", "ricci"]
    value: float


class SeamSample(BaseModel):
    """One-sided curvature at a doubling seam."""

    side: Literal["left", "right"]
    r: float
    scalar: float
    ric_radial: float
    ric_tangential: float


class HypothesisReport(BaseModel):
    scalar_ok: bool
    ricci_ok: bool
    min_scalar: float
    min_ricci_eigenvalue: float
    violations: list[Violation] = Field(default_factory=list)
    seam_samples: list[SeamSample] = Field(default_factory=list)
    grid_size: int

    @property
    def passed(self) -> bool:
        return self.scalar_ok and self.ricci_ok


# ── Geodesic balls ───────────────────────────────────────────────────────────


class SphereGeometry(BaseModel):
    """Coordinate sphere at distance r from a pole."""

    r: float
    pole: Pole
    area: float
    mean_curvature: float
    second_form_norm_sq: float
    normal_ricci_integral: float
    scalar_integral: float


# ── Hawking mass and inequalities ────────────────────────────────────────────


class MonotonicityVerdict(BaseModel):
    monotone: bool
    min_derivative: float
    violating_volume: Optional[float] = None
    tolerance: float
    profile_nondecreasing: bool


class RigidityVerdict(BaseModel):
    max_area: float
    rigid: bool
    tolerance: float
    s3_max_deviation: float = Field(description="max |I − I_S3| over shared grid volumes")
    volume_defect: float = Field(description="|vol(M) − 2π²|")


class S3Agreement(BaseModel):
    """Equality case of the monotonicity lemma: where m_H vanishes, I = I_S3."""

    vanishing_up_to: float
    max_deviation: float


class InequalityRecord(BaseModel):
    r: float
    volume: float
    area: float
    mean_curvature: float
    isecond: float
    basic_lhs: float
    refined_bound: float
    monotonicity_bound: float
    gauss_bonnet_gap: float
    cy_lhs: float
    cy_rhs: float
    cy_slack: float
    realized: bool


class InequalityLedger(BaseModel):
    pole: Pole
    records: list[InequalityRecord]


# ── Ball expansion ───────────────────────────────────────────────────────────


class ExpansionReport(BaseModel):
    pole: Pole
    scalar: float
    ric_norm_sq: float
    laplacian_scalar: float
    c1_analytic: float
    c2_analytic: float
    area_coefficient6: float
    c1_fitted: Optional[float] = None
    c2_fitted: Optional[float] = None
    fit_residual_norm: Optional[float] = None
    fit_window: Optional[tuple[float, float]] = None
    sample_count: Optional[int] = None
    note: str = "evaluated at a pole of the rotational symmetry; off-pole balls are not covered"


class ScalarBoundComparison(BaseModel):
    w: float
    volume: float
    ball_area: float
    profile_area: float
    margin: float


class ScalarBoundReport(BaseModel):
    pole: Pole
    profile_source: ProfileSource
    comparisons: list[ScalarBoundComparison]
    comparison_holds: bool
    implied_c1_lower_bound: float
    scalar_at_pole: float
    scalar_upper_bound: float
    scalar_slack: float
    scalar_equals_six: bool
    bound_confirmed: bool = Field(description="R(p) = 6 and every small ball stays above the profile")


class RicciBoundReport(BaseModel):
    pole: Pole
    ric_norm_sq: float
    laplacian_scalar: float
    area_coefficient6: float
    identity_value: float = Field(description="−|Ric|²/1890 − 17/1575")
    identity_residual: float
    cauchy_schwarz_floor: float
    bound_holds: bool
    einstein: bool


# ── CMC competitors ──────────────────────────────────────────────────────────


class CompetitorRecord(BaseModel):
    target_volume: float
    candidate_area: float
    competitor_count: int
    min_competitor_area: Optional[float] = None
    min_competitor_volume: Optional[float] = None
    profile_at_competitor: Optional[float] = None
    beaten: bool = False


class CompetitorReport(BaseModel):
    records: list[CompetitorRecord]
    any_beaten: bool
    summary: str


# ── Run configuration ────────────────────────────────────────────────────────


class GridConfig(BaseModel):
    profile_size: int = Field(default=512, ge=128)
    curvature_size: int = Field(default=256, ge=64)


class FitWindow(BaseModel):
    r_min: float = Field(gt=0)
    r_max: float = Field(gt=0)
    sample_count: int = Field(default=40, ge=20)


class RunConfig(BaseModel):
    metric: WarpingSpec
    grid: GridConfig = Field(default_factory=GridConfig)
    tolerances: dict[str, float] = Field(default_factory=dict)
    fit_window: Optional[FitWindow] = None
    output_dir: Path = Path("artifacts")

    @field_validator("tolerances")
    @classmethod
    def _positive_tolerances(cls, value: dict[str, float]) -> dict[str, float]:
        bad = [name for name, tol in value.items() if not tol > 0]
        if bad:
            raise ValueError(f"Tolerance overrides must be positive: {', '.join(bad)}")
        return value


# ── Verdict document ─────────────────────────────────────────────────────────


class ProofStep(BaseModel):
    name: str
    passed: bool
    detail: str = ""


class MinOoAudit(BaseModel):
    totally_geodesic: bool
    boundary_radius: float
    boundary_area: float
    boundary_area_ok: bool
    boundary_isoperimetric: bool

    @property
    def passed(self) -> bool:
        return self.totally_geodesic and self.boundary_area_ok and self.boundary_isoperimetric


class VerdictDocument(BaseModel):
    """JSON document emitted by `rigidity` and `full-report`."""

    command: Command
    metric: str
    verdict: str
    rigid: Optional[bool] = None
    steps: list[ProofStep] = Field(default_factory=list)
    hypotheses: Optional[HypothesisReport] = None
    max_area: Optional[float] = None
    volume_defect: Optional[float] = None
    min_oo: Optional[MinOoAudit] = None
    artifacts: list[str] = Field(default_factory=list)
