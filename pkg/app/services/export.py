from pathlib import Path
from typing import Dict, List, Optional

import pandas as pd

from app.core.config import get_settings
from app.core.logging import logger
from app.models.results import PointResult
from app.services.pipeline import COLUMNS, KS_COLUMN, to_rows


settings = get_settings()


def results_frame(results: List[PointResult], with_ks: bool = False) -> pd.DataFrame:
    columns = COLUMNS + ([KS_COLUMN] if with_ks else [])
    return pd.DataFrame(to_rows(results, with_ks=with_ks), columns=columns)


def write_csv(frame: pd.DataFrame, path: str) -> Path:
    """RFC-4180 CSV, '.' decimals, 17 significant digits, empty cells for NaN."""
    target = Path(path)
    if target.parent and not target.parent.exists():
        target.parent.mkdir(parents=True, exist_ok=True)

    frame.to_csv(
        target,
        index=False,
        float_format=settings.CSV_FLOAT_FORMAT,
        na_rep="",
        lineterminator="\n",
        encoding="utf-8",
    )
    logger.info(f"wrote {len(frame)} row(s) to {target}")
    return target


def summary_counts(results: List[PointResult]) -> Dict[str, int]:
    counts: Dict[str, int] = {}
    for result in results:
        counts[result.regime.value] = counts.get(result.regime.value, 0) + 1
        for flag in result.flags:
            counts[f"flag:{flag}"] = counts.get(f"flag:{flag}", 0) + 1
    return counts


def default_output(scenario_path: str, explicit: Optional[str]) -> str:
    if explicit:
        return explicit
    return str(Path(scenario_path).with_suffix(".csv"))
