"""
LabService — the command pipeline.

Single entry point: run_command(command, config)
Thin dispatcher: builds the metric, runs the module operations a command needs
and hands every artifact to ArtifactRepository. The `rigidity` chain logs each
proof step and stops at the first step that decides the verdict.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from app.config import Settings
from app.lab.ball_expansion import (
    default_window,
    fit_coefficients,
    fit_samples,
    ricci_bound_check,
    scalar_bound_check,
)
from app.lab.cmc_shooting import compare_with_profile, find_closed_cmc
from app.lab.geodesic_balls import ProfileTable, candidate_area_at, candidate_profile
from app.lab.hawking import (
    HawkingTable,
    check_monotonicity,
    hawking_table,
    inequality_ledger,
    integrate_rigidity_ode,
    max_isoperimetric_area,
    s3_agreement,
)
from app.lab.warp_metric import WarpedMetric, build_metric, curvature_arrays, double, verify_hypotheses
from app.repository import ArtifactRepository
from app.schemas import (
    Command,
    HypothesisReport,
    MinOoAudit,
    Pole,
    ProfileSource,
    ProofStep,
    RunConfig,
    VerdictDocument,
)
from app.services.summary import render_summary

logger = logging.getLogger(__name__)

FOUR_PI = 4.0 * math.pi
LEDGER_RADII = 50
COMPETITOR_VOLUMES = 10

RIGID_VERDICT = "rigid: profile coincides with S³, R ≡ 6, Einstein at poles"
MIN_OO_VERDICT = "rigid (Min-Oo instance)"


@dataclass
class RunOutcome:
    command: Command
    exit_code: int
    artifacts: list[str] = field(default_factory=list)
    verdict: Optional[VerdictDocument] = None


@dataclass
class _Run:
    """Per-run state shared by the command handlers."""

    config: RunConfig
    metric: WarpedMetric
    hypotheses: Optional[HypothesisReport] = None
    profile: Optional[ProfileTable] = None
    hawking: Optional[HawkingTable] = None
    exit_code: int = 0


class LabService:
    """Runs one command against one configuration."""

    def __init__(self, settings: Settings, repository: ArtifactRepository):
        self.settings = settings
        self.repo = repository
        self._handlers: dict[Command, Callable[[_Run], Optional[VerdictDocument]]] = {
            Command.CURVATURE: self._curvature,
            Command.PROFILE: self._profile,
            Command.HAWKING: self._hawking,
            Command.RIGIDITY: self._rigidity,
            Command.EXPANSION: self._expansion,
            Command.INEQUALITIES: self._inequalities,
            Command.DOUBLE: self._double,
            Command.CMC: self._cmc,
            Command.FULL_REPORT: self._full_report,
        }

    def run_command(self, command: Command, config: RunConfig) -> RunOutcome:
        logger.info(f"Running {command.value} on {config.metric.kind}")
        metric = build_metric(config.metric, self.settings)
        run = _Run(config=config, metric=metric)
        verdict = self._handlers[command](run)
        return RunOutcome(
            command=command, exit_code=run.exit_code, artifacts=list(self.repo.written), verdict=verdict
        )

    # ── Shared steps ─────────────────────────────────────────────────────────

    def _closed(self, run: _Run) -> WarpedMetric:
        """The metric itself, or its double when it has a boundary."""
        if not run.metric.closed:
            run.metric = double(run.metric, self.settings)
        return run.metric

    def _ensure_hypotheses(self, run: _Run) -> HypothesisReport:
        if run.hypotheses is None:
            run.hypotheses = verify_hypotheses(run.metric, run.config.grid.curvature_size, self.settings)
            if not run.hypotheses.passed:
                run.exit_code = 1
        return run.hypotheses

    def _ensure_profile(self, run: _Run) -> ProfileTable:
        if run.profile is None:
            run.profile = candidate_profile(self._closed(run), run.config.grid.profile_size, self.settings)
        return run.profile

    def _ensure_hawking(self, run: _Run) -> HawkingTable:
        if run.hawking is None:
            run.hawking = hawking_table(self._ensure_profile(run), self.settings)
        return run.hawking

    # ── Commands ─────────────────────────────────────────────────────────────

    def _curvature(self, run: _Run) -> None:
        report = self._ensure_hypotheses(run)
        radii = np.linspace(0.0, run.metric.length, run.config.grid.curvature_size + 1)
        if run.metric.seam is not None:
            notch = self.settings.seam_notch_fraction * run.metric.length
            radii = radii[np.abs(radii - run.metric.seam) >= notch]
        scalar, radial, tangential = curvature_arrays(run.metric, radii, self.settings)
        self.repo.write_csv(
            "curvature.csv",
            ["r", "scalar", "ricRadial", "ricTangential"],
            zip(radii, scalar, radial, tangential),
        )
        self.repo.write_json("hypotheses.json", report)

    def _profile(self, run: _Run) -> None:
        profile = self._ensure_profile(run)
        self.repo.write_csv("profile.csv", ["V", "I", "Iprime", "Isecond", "pole", "r"], profile.rows())

    def _hawking(self, run: _Run) -> None:
        if "profile.csv" not in self.repo.written:
            self._profile(run)
        table = self._ensure_hawking(run)
        verdict = check_monotonicity(table, table.total_volume)
        self.repo.write_csv("hawking.csv", ["V", "mH", "dmH"], table.rows())

        ode = integrate_rigidity_ode(settings=self.settings)
        self.repo.write_csv("rigidity_ode.csv", ["V", "I", "Iprime"], zip(ode.volume, ode.area, ode.iprime))
        self.repo.write_json(
            "hawking.json",
            {
                "metric": run.metric.name,
                "limitAtZero": table.limit_at_zero,
                "monotonicity": verdict.model_dump(),
                "s3Agreement": s3_agreement(run.profile, table).model_dump(),
            },
        )

    def _rigidity(self, run: _Run) -> VerdictDocument:
        document = self._rigidity_chain(run, Command.RIGIDITY)
        self._write_verdict(document)
        return document

    def _rigidity_chain(self, run: _Run, command: Command) -> VerdictDocument:
        steps: list[ProofStep] = []

        def step(name: str, passed: bool, detail: str) -> None:
            steps.append(ProofStep(name=name, passed=passed, detail=detail))
            log = logger.info if passed else logger.warning
            log(f"Proof step {name}: {'passed' if passed else 'failed'} ({detail})")

        metric = self._closed(run)
        hypotheses = self._ensure_hypotheses(run)
        step(
            "hypotheses",
            hypotheses.passed,
            f"min R = {hypotheses.min_scalar:.10g}, min Ric = {hypotheses.min_ricci_eigenvalue:.10g}",
        )
        document = VerdictDocument(command=command, metric=metric.name, verdict="", hypotheses=hypotheses)
        if not hypotheses.passed:
            document.verdict = (
                f"hypotheses violated: min R = {hypotheses.min_scalar:.6g}, "
                f"min Ric = {hypotheses.min_ricci_eigenvalue:.6g}"
            )
            document.steps = steps
            return document

        profile = self._ensure_profile(run)
        step("profile", True, f"{len(profile)} nodes, total volume {profile.total_volume:.12g}")

        table = self._ensure_hawking(run)
        mono = check_monotonicity(table, profile.total_volume)
        step(
            "hawking_monotonicity",
            mono.monotone,
            f"min Δm_H = {mono.min_derivative:.3e}, limit at 0 = {table.limit_at_zero:.2e}",
        )

        rigidity = max_isoperimetric_area(profile, self.settings)
        document.max_area = rigidity.max_area
        document.volume_defect = rigidity.volume_defect
        step("max_area", rigidity.rigid, f"max I = {rigidity.max_area:.10g}, 4π = {FOUR_PI:.10g}")
        if not rigidity.rigid:
            document.rigid = False
            document.verdict = f"not rigid: max area {rigidity.max_area:.4f} < 4π"
            document.steps = steps
            return document

        agreement = s3_agreement(profile, table)
        tol = self.settings.rigid_tolerance
        step(
            "s3_profile",
            rigidity.s3_max_deviation <= tol,
            f"max |I − I_S3| = {rigidity.s3_max_deviation:.3e}, m_H ≈ 0 up to V = {agreement.vanishing_up_to:.6g}",
        )
        step("volume", rigidity.volume_defect <= tol, f"|vol − 2π²| = {rigidity.volume_defect:.3e}")

        for pole in (Pole.NORTH, Pole.SOUTH):
            scalar = scalar_bound_check(
                metric, pole, ProfileSource.CANDIDATE, profile=profile, hypotheses=hypotheses, settings=self.settings
            )
            step(
                f"scalar_bound_{pole.value}",
                scalar.bound_confirmed,
                f"R = {scalar.scalar_at_pole:.10g}, slack {scalar.scalar_slack:.2e}, "
                f"small balls above profile: {scalar.comparison_holds}",
            )
            if not scalar.bound_confirmed:
                step(f"ricci_bound_{pole.value}", False, "not reached: scalar bound unconfirmed")
                continue
            ricci = ricci_bound_check(metric, pole, scalar, self.settings)
            step(
                f"ricci_bound_{pole.value}",
                ricci.einstein and ricci.identity_residual <= self.settings.einstein_tolerance,
                f"|Ric|² = {ricci.ric_norm_sq:.10g}, identity residual {ricci.identity_residual:.2e}",
            )

        document.rigid = all(s.passed for s in steps)
        document.verdict = RIGID_VERDICT if document.rigid else "inconclusive: rigid profile but a pointwise bound failed"
        document.steps = steps
        return document

    def _expansion(self, run: _Run) -> None:
        metric = run.metric
        poles = [Pole.NORTH, Pole.SOUTH] if metric.closed else [Pole.NORTH]
        for pole in poles:
            window = run.config.fit_window or default_window(metric)
            report = fit_coefficients(metric, pole, window, settings=self.settings)
            samples = fit_samples(metric, pole, window, self.settings)
            self.repo.write_json(f"expansion_{pole.value}.json", report)
            self.repo.write_csv(f"expansion_fit_{pole.value}.csv", ["r", "V", "y"], samples.rows())

    def _inequalities(self, run: _Run) -> None:
        metric = self._closed(run)
        hypotheses = self._ensure_hypotheses(run)
        radii = np.linspace(0.0, metric.length, LEDGER_RADII + 2)[1:-1]
        ledger = inequality_ledger(metric, radii, Pole.NORTH, hypotheses, self.settings)
        self.repo.write_csv(
            "inequalities.csv",
            ["r", "basicLHS", "refinedBound", "cySlack"],
            ([rec.r, rec.basic_lhs, rec.refined_bound, rec.cy_slack] for rec in ledger.records),
        )
        self.repo.write_json("inequalities.json", ledger)

    def _double(self, run: _Run) -> None:
        base = run.metric
        doubled = double(base, self.settings)
        run.metric = doubled
        hypotheses = self._ensure_hypotheses(run)
        self.repo.write_json(
            "double.json",
            {
                "base": base.name,
                "metric": doubled.name,
                "seam": doubled.seam,
                "length": doubled.length,
                "totalVolume": doubled.total_volume,
                "hypotheses": hypotheses.model_dump(),
            },
        )
        self._curvature(run)

    def _cmc(self, run: _Run) -> None:
        metric = self._closed(run)
        profile = self._ensure_profile(run)
        hypotheses = self._ensure_hypotheses(run)
        volumes = list(np.linspace(0.05, 0.5, COMPETITOR_VOLUMES) * profile.total_volume)
        report = compare_with_profile(metric, profile, volumes, hypotheses, self.settings)
        self.repo.write_json("cmc.json", report)

        quarter = candidate_area_at(metric, profile.total_volume / 4.0, self.settings)
        start = quarter.radius if quarter.pole == Pole.NORTH else metric.length - quarter.radius
        h = quarter.mean_curvature if quarter.pole == Pole.NORTH else -quarter.mean_curvature
        solution = find_closed_cmc(metric, h, start, settings=self.settings)
        self.repo.write_csv("cmc_curve.csv", ["s", "r", "theta", "cumArea", "cumVol"], solution.rows())

    def _full_report(self, run: _Run) -> VerdictDocument:
        base = run.metric
        audit = self._min_oo_audit(base) if not base.closed else None

        document = self._rigidity_chain(run, Command.FULL_REPORT)
        if audit is not None:
            document.min_oo = audit
            if document.rigid and audit.passed:
                document.verdict = MIN_OO_VERDICT
            elif document.rigid:
                document.verdict = "rigid double, but the boundary audit failed"

        self._curvature(run)
        self._profile(run)
        if run.exit_code == 0:
            self._hawking(run)
            self._expansion(run)
            self._inequalities(run)
            self._cmc(run)
        self._write_verdict(document)
        return document

    def _min_oo_audit(self, base: WarpedMetric) -> MinOoAudit:
        f, slope = base.derivatives(base.length)[:2]
        boundary_area = FOUR_PI * f**2
        doubled = double(base, self.settings)
        middle = candidate_area_at(doubled, doubled.total_volume / 2.0, self.settings)
        audit = MinOoAudit(
            totally_geodesic=abs(slope) <= self.settings.totally_geodesic_tolerance,
            boundary_radius=base.length,
            boundary_area=boundary_area,
            boundary_area_ok=boundary_area >= FOUR_PI - self.settings.rigid_tolerance,
            boundary_isoperimetric=abs(middle.area - boundary_area) <= self.settings.rigid_tolerance,
        )
        logger.info(f"Min-Oo audit for {base.name}: {audit.model_dump()}")
        return audit

    def _write_verdict(self, document: VerdictDocument) -> None:
        self.repo.write_text("summary.md", render_summary(document))
        document.artifacts = sorted(set(self.repo.written) | {"verdict.json"})
        self.repo.write_json("verdict.json", document)
