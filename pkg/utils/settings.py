"""
Settings Module
Environment-driven defaults for the forge harness
"""
import os

from dotenv import load_dotenv

# Load environment variables
load_dotenv()

BASE_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def _int_env(name: str, default: int) -> int:
    value = os.getenv(name)
    if value is None or not value.strip():
        return default
    try:
        return int(value)
    except ValueError:
        raise ValueError(f"Environment variable {name} must be an integer, got {value!r}")


def _float_env(name: str, default: float) -> float:
    value = os.getenv(name)
    if value is None or not value.strip():
        return default
    try:
        return float(value)
    except ValueError:
        raise ValueError(f"Environment variable {name} must be a number, got {value!r}")


def default_workers() -> int:
    """Worker cap: FORGE_THREADS if set, otherwise the available parallelism"""
    return max(1, _int_env("FORGE_THREADS", os.cpu_count() or 1))


LOG_DIR = os.getenv("FORGE_LOG_DIR", os.path.join(BASE_DIR, "logs"))
LOG_LEVEL = os.getenv("FORGE_LOG_LEVEL", "INFO").upper()
RUN_LOG_DIR = os.getenv("FORGE_RUN_LOG_DIR", os.path.join(LOG_DIR, "runs"))

DEFAULT_SAMPLES = _int_env("FORGE_SAMPLES", 100_000)
DEFAULT_CONFIDENCE = _float_env("FORGE_CONFIDENCE", 0.99)
DEFAULT_N_CAP = _int_env("FORGE_N_CAP", 12)
DEFAULT_EXACT_THRESHOLD = 8
DEFAULT_EXACT_MASS_TOL = 1e-2
DEFAULT_EXACT_PATH_BUDGET = 100_000
DEFAULT_MAX_TRIAL_STEPS = 1_000_000
