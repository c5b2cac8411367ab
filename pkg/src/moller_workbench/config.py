"""Configuration loading, environment overrides and hashing."""

import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Union

from pydantic import ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from moller_workbench.errors import ConfigurationError
from moller_workbench.schema import Config

logger = logging.getLogger(__name__)


class WorkbenchSettings(BaseSettings):
    """Overrides read from ``MOLLER_*`` environment variables."""

    model_config = SettingsConfigDict(env_prefix="MOLLER_")

    tolerance: Optional[float] = None
    oracle_cap: Optional[int] = None
    work_dir: Optional[str] = None
    seed: Optional[int] = None


def load_config(config_source: Union[str, Path, Dict[str, Any]]) -> Config:
    """Load and validate workbench configuration.

    Args:
        config_source: Either a file path or a dict with configuration.

    Returns:
        Validated Config object.

    Raises:
        FileNotFoundError: If config file path doesn't exist.
        ConfigurationError: If configuration is invalid.
    """
    if isinstance(config_source, (str, Path)):
        config_path = Path(config_source)
        if not config_path.exists():
            raise FileNotFoundError(f"Config file not found: {config_source}")

        with open(config_path) as f:
            try:
                config_dict = json.load(f)
            except json.JSONDecodeError as e:
                raise ConfigurationError(f"Invalid configuration: {e}")
    else:
        config_dict = config_source

    try:
        return Config(**config_dict)
    except (ValidationError, TypeError) as e:
        raise ConfigurationError(f"Invalid configuration: {e}")


def apply_overrides(
    config: Config,
    settings: Optional[WorkbenchSettings] = None,
    seed: Optional[int] = None,
    tolerance: Optional[float] = None,
    work_dir: Optional[str] = None,
    dense: bool = False,
) -> Config:
    """Layer environment and command-line overrides onto a loaded config.

    Command-line values win over the environment, which wins over the file.
    A tolerance override replaces the composed and algebra tolerances.

    Raises:
        ConfigurationError: If an override produces an invalid configuration.
    """
    settings = settings if settings is not None else WorkbenchSettings()
    data = config.model_dump()

    def pick(cli_value: Any, env_value: Any) -> Any:
        return cli_value if cli_value is not None else env_value

    tol = pick(tolerance, settings.tolerance)
    if tol is not None:
        data["tolerances"]["composed"] = tol
        data["tolerances"]["algebra"] = tol
    root_seed = pick(seed, settings.seed)
    if root_seed is not None:
        data["battery"]["seed"] = root_seed
    target = pick(work_dir, settings.work_dir)
    if target is not None:
        data["work_dir"] = target
    if settings.oracle_cap is not None:
        data["oracle"]["cap"] = settings.oracle_cap
    if dense:
        data["oracle"]["dense"] = True
    result = load_config(data)
    if result != config:
        logger.info("applied configuration overrides")
    return result


def config_hash(config: Config) -> str:
    """SHA-256 of the canonical JSON dump; the work directory is not hashed."""
    data = config.model_dump(mode="json", exclude={"work_dir"})
    canonical = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
