import os
import logging
from pathlib import Path
from typing import Any, Dict, Optional

import yaml

from .config import RunConfig, set_dotted

CONFIG_FILE_NAME = "cxverb-config.yaml"
RESOLVED_CONFIG_NAME = "resolved-config.yaml"


def find_config_file(config_file: Optional[str] = None) -> Optional[str]:
    """
    Find configuration file in order of priority:
    1. Explicitly provided config_file parameter
    2. CXVERB_CONFIG_FILE environment variable
    3. cxverb-config.yaml in current directory
    4. cxverb-config.yaml in project root (where pyproject.toml is)
    """
    logger = logging.getLogger(__name__)

    if config_file:
        logger.debug("Checking explicitly provided config file: %s", config_file)
        if os.path.exists(config_file):
            logger.info("Found explicit config file: %s", config_file)
            return config_file
        else:
            logger.error("Specified config file not found: %s", config_file)
            raise FileNotFoundError(f"Specified config file not found: {config_file}")

    env_config = os.getenv('CXVERB_CONFIG_FILE')
    if env_config:
        logger.debug("Found CXVERB_CONFIG_FILE environment variable: %s", env_config)
        if os.path.exists(env_config):
            logger.info("Using config file from environment variable: %s", env_config)
            return env_config
        else:
            logger.warning("Config file from environment variable does not exist: %s", env_config)

    current_dir_config = Path.cwd() / CONFIG_FILE_NAME
    logger.debug("Checking for config file in current directory: %s", current_dir_config)
    if current_dir_config.exists():
        logger.info("Found config file in current directory: %s", current_dir_config)
        return str(current_dir_config)

    current_path = Path.cwd()
    logger.debug("Searching for config file in project root directories")
    for parent in [current_path] + list(current_path.parents):
        if (parent / "pyproject.toml").exists():
            project_config = parent / CONFIG_FILE_NAME
            logger.debug("Checking project root config: %s", project_config)
            if project_config.exists():
                logger.info("Found config file in project root: %s", project_config)
                return str(project_config)

    logger.debug("No configuration file found in any searched location")
    return None


def load_config(config_file: Optional[str] = None,
                overrides: Optional[Dict[str, Any]] = None,
                search: bool = True) -> RunConfig:
    """
    Load a RunConfig with priority handling:
    1. Dotted-key overrides, typically from command-line flags (highest priority)
    2. Configuration file values
    3. Environment variables (CXVERB_ prefix, '__' between nested keys)
    4. Preset defaults, then field defaults (lowest priority)

    Args:
        config_file: Optional path to a YAML or key=value configuration file
        overrides: Optional mapping of dotted keys ('train.alpha') to values
        search: When no file is given, look for one in the standard locations

    Returns:
        RunConfig object with resolved configuration

    Raises:
        FileNotFoundError: If an explicit config_file does not exist
        pydantic.ValidationError: If values are invalid or keys are unknown
    """
    logger = logging.getLogger(__name__)
    logger.debug("Loading cxverb configuration with config_file=%s, %d overrides",
                 config_file, len(overrides or {}))

    path = find_config_file(config_file) if (config_file or search) else None

    if path:
        return RunConfig.from_file(path, overrides)

    logger.info("No configuration file found, using defaults with environment variable overrides")
    data: Dict[str, Any] = {}
    for key, value in (overrides or {}).items():
        set_dotted(data, key, value)
    return RunConfig(**data)


def write_resolved_config(config: RunConfig, out_dir: Optional[str] = None) -> str:
    """Write the fully resolved configuration next to a run's outputs and return its path."""
    logger = logging.getLogger(__name__)
    target = Path(out_dir or config.out_dir)
    target.mkdir(parents=True, exist_ok=True)
    path = target / RESOLVED_CONFIG_NAME
    with open(path, 'w') as f:
        yaml.safe_dump(config.resolved(), f, sort_keys=True)
    logger.info("Wrote resolved configuration to %s", path)
    return str(path)


def get_default_config() -> RunConfig:
    """Get default configuration (useful for testing)."""
    return RunConfig()
