"""
Command-line interface for the isoperimetric-profile laboratory.

Usage:
    isolab rigidity --config configs/round.json --out artifacts/round
    isolab full-report --config configs/hemisphere_1.json
    isolab profile --config configs/scaled_1_2.json --grid 1024
    isolab expansion --config configs/series_ball.json --seed-tolerances tol.json

Exit status: 0 success, 1 curvature hypotheses violated, 2 numerical
failure, 3 malformed configuration.
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path
from typing import Optional

import click
from pydantic import ValidationError

from app.config import Settings, get_settings
from app.exceptions import LabError, MalformedConfig
from app.repository import ArtifactRepository
from app.schemas import Command, GridConfig, RunConfig
from app.services.pipeline import LabService

logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
)
logger = logging.getLogger(__name__)

__all__ = ["cli"]


# ── Configuration loading ────────────────────────────────────────────────────


def load_run_config(path: Path, out: Optional[Path] = None, grid: Optional[int] = None) -> RunConfig:
    """Parse the run configuration and apply command-line overrides."""
    try:
        config = RunConfig.model_validate_json(Path(path).read_text(encoding="utf-8"))
        updates = {}
        if out is not None:
            updates["output_dir"] = Path(out)
        if grid is not None:
            updates["grid"] = GridConfig(profile_size=grid, curvature_size=config.grid.curvature_size)
        return config.model_copy(update=updates)
    except OSError as exc:
        raise MalformedConfig(f"Cannot read configuration {path}: {exc}") from exc
    except ValidationError as exc:
        raise MalformedConfig(f"Invalid configuration {path}: {exc}") from exc


def load_settings(config: RunConfig, seed_tolerances: Optional[Path] = None) -> Settings:
    """Environment, then the config's tolerance block, then the seed file."""
    try:
        settings = get_settings().with_overrides(config.tolerances)
        if seed_tolerances is not None:
            overrides = json.loads(Path(seed_tolerances).read_text(encoding="utf-8"))
            if not isinstance(overrides, dict):
                raise ValueError("seed tolerances must be a JSON object")
            settings = settings.with_overrides(overrides)
        return settings
    except (OSError, ValueError) as exc:
        raise MalformedConfig(f"Invalid tolerance overrides: {exc}") from exc


def execute(
    command: Command,
    config_path: Path,
    out: Optional[Path] = None,
    grid: Optional[int] = None,
    seed_tolerances: Optional[Path] = None,
) -> int:
    """Run one command end to end and return the process exit status."""
    try:
        config = load_run_config(config_path, out, grid)
        settings = load_settings(config, seed_tolerances)
        logging.getLogger().setLevel(settings.log_level.upper())

        service = LabService(settings, ArtifactRepository(config.output_dir))
        outcome = service.run_command(command, config)
    except LabError as exc:
        logger.error(f"{command.value} failed ({type(exc).__name__}): {exc}")
        click.echo(f"Error: {exc}", err=True)
        return exc.exit_code
    except Exception as exc:
        logger.error(f"{command.value} crashed: {exc}", exc_info=True)
        click.echo(f"Error: {exc}", err=True)
        return 2

    if outcome.verdict is not None:
        click.echo(outcome.verdict.verdict)
    for name in outcome.artifacts:
        click.echo(f"  {config.output_dir / name}")
    return outcome.exit_code


# ── Commands ─────────────────────────────────────────────────────────────────


def run_options(func):
    func = click.option(
        "--seed-tolerances",
        type=click.Path(dir_okay=False, path_type=Path),
        default=None,
        help="JSON object of tolerance overrides",
    )(func)
    func = click.option("--grid", type=int, default=None, help="Profile grid size (V-intervals)")(func)
    func = click.option("--out", type=click.Path(file_okay=False, path_type=Path), default=None, help="Output directory")(func)
    func = click.option(
        "--config", "config_path", type=click.Path(dir_okay=False, path_type=Path), required=True,
        help="Run configuration (JSON)",
    )(func)
    return func


@click.group()
@click.version_option(version="0.1.0", prog_name="isolab")
def cli():
    """Isoperimetric profiles, Hawking mass and rigidity checks on warped 3-spheres."""


COMMAND_HELP = {
    Command.CURVATURE: "Curvature along r and the R ≥ 6, Ric > 0 hypotheses.",
    Command.PROFILE: "Candidate isoperimetric profile on a uniform volume grid.",
    Command.HAWKING: "Adapted Hawking mass, monotonicity and the rigidity ODE.",
    Command.RIGIDITY: "The rigidity proof chain, emitted as one verdict document.",
    Command.EXPANSION: "Small-ball expansion coefficients at the poles.",
    Command.INEQUALITIES: "Basic-estimate and Christodoulou–Yau ledger on coordinate spheres.",
    Command.DOUBLE: "Double a metric across its totally geodesic boundary.",
    Command.CMC: "CMC competitor search against the candidate profile.",
    Command.FULL_REPORT: "Everything above, with the doubling path for metrics with boundary.",
}


def _register(command: Command) -> None:
    @cli.command(name=command.value, help=COMMAND_HELP[command])
    @run_options
    def _run(config_path: Path, out: Optional[Path], grid: Optional[int], seed_tolerances: Optional[Path]):
        sys.exit(execute(command, config_path, out, grid, seed_tolerances))


for _command in Command:
    _register(_command)


if __name__ == "__main__":
    cli()
