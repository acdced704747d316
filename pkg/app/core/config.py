import os
from functools import lru_cache
from dotenv import load_dotenv

# Safe dotenv loading
try:
    load_dotenv()
except Exception:
    # If dotenv cannot load, continue safely with environment variables
    pass


def _env_float(name: str, default: float) -> float:
    try:
        return float(os.getenv(name, default))
    except (TypeError, ValueError):
        return default


def _env_int(name: str, default: int) -> int:
    try:
        return int(os.getenv(name, default))
    except (TypeError, ValueError):
        return default


class Settings:
    APP_NAME: str = "fso-qkd: free-space optical quantum link bounds and CV-QKD rates"
    VERSION: str = "1.0.0"

    LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO")

    # ------------------------------------------------------------------
    # Physical constants (CODATA, exact SI definitions)
    # ------------------------------------------------------------------

    PLANCK_H: float = 6.62607015e-34
    LIGHT_C: float = 299792458.0

    # ------------------------------------------------------------------
    # Link defaults
    # ------------------------------------------------------------------

    SCALE_HEIGHT_M: float = 6600.0
    POINTING_JITTER_RAD: float = 1e-6
    TX_APERTURE_RATIO: float = 2.0  # aT >= 2 w0

    # ------------------------------------------------------------------
    # Turbulence regime rules
    # ------------------------------------------------------------------

    YURA_PHI_LIMIT: float = 0.33
    # rho0 / w0 at and above which wandering is dropped (sigma_TB = 0, w_st = w_lt)
    NEGLIGIBLE_WANDER_RATIO: float = _env_float("NEGLIGIBLE_WANDER_RATIO", 1.0)
    FRIED_RATIO: float = 2.088

    # ------------------------------------------------------------------
    # Numerics
    # ------------------------------------------------------------------

    QUAD_EPSREL: float = 1e-9
    QUAD_EPSABS: float = 1e-15
    QUAD_LIMIT: int = 400
    # exp(-37) ~ 1e-16: truncation point of Weibull-type tails
    TAIL_EXPONENT: float = 37.0
    LN_TAIL_MAX: float = 40.0
    SMALL_TAU: float = 1e-3
    CM_TOLERANCE: float = 1e-12

    TAIL_EPS_THRESHOLD: float = 1e-17

    # ------------------------------------------------------------------
    # Rate optimisation
    # ------------------------------------------------------------------

    OPT_GRID_POINTS: int = _env_int("OPT_GRID_POINTS", 25)
    MU_MIN_OFFSET: float = 1e-3
    MU_MAX: float = _env_float("MU_MAX", 1e4)
    MU_HARD_CAP: float = 1e8
    ETA_TH_MIN_FRACTION: float = 1e-3
    ETA_TH_MAX_FRACTION: float = 1.0 - 1e-6

    # ------------------------------------------------------------------
    # Runs, oracles, output
    # ------------------------------------------------------------------

    DEFAULT_SEED: int = _env_int("DEFAULT_SEED", 20200101)
    DEFAULT_THREADS: int = _env_int("DEFAULT_THREADS", 1)
    ORACLE_CHUNK: int = 1 << 16

    CSV_SCHEMA_VERSION: int = 1
    CSV_FLOAT_FORMAT: str = "%.17g"
    SUMMARY_SUFFIX: str = ".summary.json"


@lru_cache
def get_settings() -> Settings:
    return Settings()
