"""
Configuration Module for the QNC toolkit.

This module loads experiment configurations from JSON files.
"""

import json
import logging
from dataclasses import fields
from typing import Any, Dict

from .exceptions import ConfigError
from .models import ExperimentConfig

logger = logging.getLogger(__name__)


def config_from_dict(data: Dict[str, Any]) -> ExperimentConfig:
    """Build and validate a configuration from a key-value mapping.

    Args:
        data: Mapping whose keys are ExperimentConfig field names

    Returns:
        Validated ExperimentConfig
    """
    if not isinstance(data, dict):
        raise ConfigError(f"configuration must be a JSON object, got {type(data).__name__}")
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
    try:
        cfg = ExperimentConfig(**data)
        cfg.validate()
    except ConfigError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid configuration: {e}") from e
    return cfg


def load_config(path: str) -> ExperimentConfig:
    """Load an experiment configuration from a JSON file.

    Args:
        path: Path to the configuration file

    Returns:
        Validated ExperimentConfig
    """
    try:
        with open(path) as handle:
            data = json.load(handle)
    except FileNotFoundError:
        raise ConfigError(f"configuration file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from e
    cfg = config_from_dict(data)
    logger.info(f"Loaded configuration from {path}")
    return cfg


def write_config(cfg: ExperimentConfig, path: str) -> str:
    """Write a configuration as JSON."""
    with open(path, 'w') as handle:
        json.dump(cfg.to_dict(), handle, indent=2)
    return path
