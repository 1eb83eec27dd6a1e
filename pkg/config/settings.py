# config/settings.py
import os
import logging
from dotenv import load_dotenv

logger = logging.getLogger(__name__)

# --- Load Environment Variables ---
dotenv_path = os.path.join(os.path.dirname(__file__), '..', '.env')
if os.path.exists(dotenv_path):
    load_dotenv(dotenv_path=dotenv_path)
    logger.debug("Loaded environment variables from .env file.")
else:
    logger.debug(".env file not found, relying on system environment variables.")


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw)
    except ValueError:
        logger.warning(f"Ignoring non-integer {name}={raw!r}, using {default}")
        return default


def _env_float(name: str, default: float) -> float:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return float(raw)
    except ValueError:
        logger.warning(f"Ignoring non-numeric {name}={raw!r}, using {default}")
        return default


# --- Run Defaults (overridable from the environment) ---
DEFAULT_SEED = _env_int("GMRF_SEED", 20240101)
DEFAULT_OUTPUT_DIR = os.getenv("GMRF_OUTPUT_DIR", "runs")
DEFAULT_WORKERS = _env_int("GMRF_WORKERS", 4)
DEFAULT_ALPHA = _env_float("GMRF_ALPHA", 0.001)
DEFAULT_RHO = _env_float("GMRF_RHO", 0.995)
DEFAULT_ORDERING = os.getenv("GMRF_ORDERING", "rcm")
DEFAULT_FIELD_THIN = _env_int("GMRF_FIELD_THIN", 10)
DEFAULT_LOG_FILE = os.getenv("GMRF_LOG_FILE") or None

# Dense oracles (exact moments, rho bounds) refuse larger problems
DENSE_LIMIT = _env_int("GMRF_DENSE_LIMIT", 2000)

# --- Numerical Constants ---
PIVOT_RTOL = 1e-12          # pivot <= PIVOT_RTOL * max(diag) is not positive definite
PG_EXACT_SUM_MAX = 50       # PG(b, z) by summation up to this b, normal approximation above
PG_SERIES_TOL = 1e-12       # alternating-series bracket width accepted as converged
PG_TRUNCATION = 0.64        # switch point between the two series representations

# --- Prior Constants for the Binomial Model ---
BETA0_PRIOR_VAR = 1000.0
TAU2_PRIOR_SHAPE = 1.0
TAU2_PRIOR_RATE = 1.0

logger.debug("Configuration loaded.")
