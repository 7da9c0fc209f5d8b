import math
from functools import lru_cache

from pydantic import PositiveFloat, PositiveInt
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Laboratory settings: named tolerances and grid defaults"""

    # Metric construction
    pole_window_fraction: PositiveFloat = 1e-3
    seam_notch_fraction: PositiveFloat = 1e-2
    closure_tolerance: PositiveFloat = 1e-9
    totally_geodesic_tolerance: PositiveFloat = 1e-10

    # Hypotheses and verdicts
    scalar_slack: PositiveFloat = 1e-9
    mono_tolerance_factor: PositiveFloat = 1e-6
    rigid_tolerance: PositiveFloat = 1e-4 * 4 * math.pi
    einstein_tolerance: PositiveFloat = 1e-6

    # Integrators
    ode_tolerance: PositiveFloat = 1e-10
    cmc_closure_tolerance: PositiveFloat = 1e-8
    cmc_volume_match: PositiveFloat = 1e-2
    competitor_margin: PositiveFloat = 1e-3

    # Grids
    volume_table_intervals: PositiveInt = 2048
    profile_size: PositiveInt = 512
    curvature_size: PositiveInt = 256

    log_level: str = "INFO"

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_prefix="ISOLAB_",
        extra="ignore",
    )

    def with_overrides(self, overrides: dict[str, float]) -> "Settings":
        """Return a validated copy with tolerance overrides applied."""
        unknown = sorted(set(overrides) - set(type(self).model_fields))
        if unknown:
            raise ValueError(f"Unknown tolerance names: {', '.join(unknown)}")
        merged = self.model_dump()
        merged.update(overrides)
        # Validate through the model, bypassing env sources
        return type(self).model_validate(merged)


@lru_cache
def get_settings() -> Settings:
    return Settings()
