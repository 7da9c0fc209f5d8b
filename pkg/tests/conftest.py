import json

import pytest

from app.config import Settings
from app.lab.geodesic_balls import candidate_profile
from app.lab.warp_metric import build_metric
from app.schemas import HemisphereSpec, RoundSpec, ScaledSpec


@pytest.fixture(scope="session")
def settings() -> Settings:
    # Explicit defaults so a developer's .env cannot shift the tolerances
    return Settings(_env_file=None)


@pytest.fixture(scope="session")
def round_metric(settings):
    return build_metric(RoundSpec(), settings)


@pytest.fixture(scope="session")
def scaled_metric(settings):
    return build_metric(ScaledSpec(lam=1.2), settings)


@pytest.fixture(scope="session")
def hemisphere_metric(settings):
    return build_metric(HemisphereSpec(lam=1.0), settings)


@pytest.fixture(scope="session")
def round_profile(round_metric, settings):
    return candidate_profile(round_metric, 512, settings)


@pytest.fixture
def write_config(tmp_path):
    """Write a run configuration into tmp_path and return its path."""

    def _write(metric: dict, **extra) -> str:
        document = {"metric": metric, "output_dir": str(tmp_path / "artifacts")}
        document.update(extra)
        path = tmp_path / "config.json"
        path.write_text(json.dumps(document), encoding="utf-8")
        return str(path)

    return _write
