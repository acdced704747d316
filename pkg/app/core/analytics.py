from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field

from app.core.config import get_settings
from app.core.logging import logger

settings = get_settings()


class RunSummary(BaseModel):
    schema_version: int
    app_version: str
    timestamp: str
    scenario: str
    output: str
    seed: int
    threads: int
    points: int
    counts: Dict[str, int] = Field(default_factory=dict)
    warnings: List[str] = Field(default_factory=list)
    override_regime: bool = False
    wall_time_s: float
    settings: Dict[str, Any] = Field(default_factory=dict)


def settings_snapshot() -> Dict[str, Any]:
    return {
        name: getattr(settings, name)
        for name in dir(settings)
        if name.isupper() and isinstance(getattr(settings, name), (int, float, str))
    }


def summary_path(csv_path: str) -> Path:
    return Path(f"{csv_path}{settings.SUMMARY_SUFFIX}")


def write_run_summary(
    csv_path: str,
    scenario_path: str,
    seed: int,
    threads: int,
    points: int,
    counts: Dict[str, int],
    wall_time: float,
    warnings: Optional[List[str]] = None,
    override_regime: bool = False,
) -> Optional[Path]:
    """JSON sidecar next to the CSV. Failures are logged, never raised."""

    try:
        try:
            summary = RunSummary(
                schema_version=settings.CSV_SCHEMA_VERSION,
                app_version=settings.VERSION,
                timestamp=datetime.now(timezone.utc).isoformat(),
                scenario=str(scenario_path),
                output=str(csv_path),
                seed=seed,
                threads=threads,
                points=points,
                counts=counts,
                warnings=warnings or [],
                override_regime=override_regime,
                wall_time_s=wall_time,
                settings=settings_snapshot(),
            )
        except Exception as err:
            logger.warning(f"Run summary skipped: assembly failed: {err}")
            return None

        target = summary_path(csv_path)
        try:
            target.write_text(summary.model_dump_json(indent=2), encoding="utf-8")
        except Exception as err:
            logger.warning(f"Failed to write run summary: {err}")
            return None

        return target

    except Exception as err:
        logger.warning(f"Run summary unexpected failure: {err}")
        return None
