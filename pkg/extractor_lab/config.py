"""
Lab configuration and validation.

This module loads every tunable of the extractor lab from environment
variables (a `.env` file is honoured through python-dotenv by the entry
points) and validates the result.
"""

import os
import logging
from typing import Optional

logger = logging.getLogger(__name__)

PRNG_VERSION = "numpy-pcg64/1"


def _int_env(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw, 0)
    except ValueError:
        logger.warning(f"Ignoring non-integer value for {name}: {raw!r}")
        return default


def _float_env(name: str, default: float) -> float:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return float(raw)
    except ValueError:
        logger.warning(f"Ignoring non-numeric value for {name}: {raw!r}")
        return default


class LabConfig:
    """Configuration manager for constructions, measurements and the API."""

    def __init__(self):
        """Load configuration from environment variables."""
        # Reproducibility
        self.prng_seed = _int_env('LAB_PRNG_SEED', 20240601)
        self.prng_version = PRNG_VERSION

        # Enumeration budgets
        self.table_cap = _int_env('LAB_TABLE_CAP', 1 << 24)
        self.exact_budget = _int_env('LAB_EXACT_BUDGET', 1 << 28)
        self.robp_seed_budget = _int_env('LAB_ROBP_SEED_BUDGET', 1 << 20)

        # Spectral certification
        self.spectral_cap = _int_env('LAB_SPECTRAL_CAP', 1 << 14)
        self.power_iterations = _int_env('LAB_POWER_ITERATIONS', 20000)
        self.power_tolerance = _float_env('LAB_POWER_TOLERANCE', 1e-13)

        # Greedy searches
        self.design_search_nodes = _int_env('LAB_DESIGN_SEARCH_NODES', 2_000_000)

        # Artifacts
        self.artifact_dir: Optional[str] = os.getenv('LAB_ARTIFACT_DIR') or None
        self.cache_max_size = _int_env('LAB_CACHE_MAX_SIZE', 256)

        # Service behaviour
        self.experiment_rate = _int_env('LAB_EXPERIMENT_RATE', 5)
        self.log_level = os.getenv('LAB_LOG_LEVEL', 'INFO').upper()
        self.port = _int_env('PORT', 8000)

    def validate(self) -> bool:
        """
        Validate the configuration.

        Returns:
            True if every setting is usable, False otherwise
        """
        valid = True

        if self.table_cap <= 0 or self.table_cap > (1 << 24):
            logger.warning(f"LAB_TABLE_CAP={self.table_cap} outside (0, 2^24]; explicit tables may be refused")
            valid = False

        if self.exact_budget <= 0:
            logger.warning("LAB_EXACT_BUDGET must be positive. Exact measurements will be refused.")
            valid = False

        if self.robp_seed_budget <= 0:
            logger.warning("LAB_ROBP_SEED_BUDGET must be positive. Distinguisher runs will be refused.")
            valid = False

        if self.spectral_cap < 2:
            logger.warning("LAB_SPECTRAL_CAP below 2; every graph will report its analytic bound")
            valid = False

        if self.power_iterations < 10 or self.power_tolerance <= 0:
            logger.warning("Power iteration settings are degenerate; λ certificates will be unreliable")
            valid = False

        if self.artifact_dir and not os.path.isdir(self.artifact_dir):
            logger.info(f"Artifact directory {self.artifact_dir} does not exist yet; it will be created on first write")

        if self.log_level not in ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'):
            logger.warning(f"Unknown log level {self.log_level}, falling back to INFO")
            self.log_level = 'INFO'
            valid = False

        return valid

    def get_settings_info(self) -> dict:
        """
        Get the effective settings.

        Returns:
            Dictionary with configuration details
        """
        return {
            'prng_seed': self.prng_seed,
            'prng_version': self.prng_version,
            'table_cap': self.table_cap,
            'exact_budget': self.exact_budget,
            'robp_seed_budget': self.robp_seed_budget,
            'spectral_cap': self.spectral_cap,
            'power_iterations': self.power_iterations,
            'power_tolerance': self.power_tolerance,
            'design_search_nodes': self.design_search_nodes,
            'artifact_dir': self.artifact_dir,
            'cache_max_size': self.cache_max_size,
            'experiment_rate': self.experiment_rate,
            'log_level': self.log_level,
        }


_config: Optional[LabConfig] = None


def get_config() -> LabConfig:
    """Return the process-wide configuration, loading it on first use."""
    global _config
    if _config is None:
        _config = LabConfig()
    return _config


def reload_config() -> LabConfig:
    """Re-read the environment and replace the process-wide configuration."""
    global _config
    _config = LabConfig()
    return _config


def validate_config_on_startup():
    """
    Validate configuration on application startup.

    Logs the effective settings and any warnings; never raises.
    """
    config = get_config()
    logger.info("=" * 60)
    logger.info("Extractor lab configuration")
    logger.info("=" * 60)

    is_valid = config.validate()
    for key, value in config.get_settings_info().items():
        logger.info(f"  {key}: {value}")

    if is_valid:
        logger.info("✓ Configuration valid")
    else:
        logger.warning("⚠ Configuration has issues; see warnings above")
    logger.info("=" * 60)
