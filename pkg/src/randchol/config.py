"""Solver configuration from YAML files and the environment."""

import logging
import os
from pathlib import Path
from typing import Any

import yaml
from pydantic import ValidationError

from .exceptions import ConfigError
from .models import SolverOptions

logger = logging.getLogger(__name__)

SEED_ENV = "RANDCHOL_SEED"


def default_seed() -> int:
    """Seed from ``RANDCHOL_SEED``, or 0 when unset.

    Raises:
        ConfigError: If the variable is not a nonnegative integer.
    """
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw.strip() == "":
        return 0
    try:
        seed = int(raw)
    except ValueError as e:
        raise ConfigError(f"{SEED_ENV}={raw!r} is not an integer", context="config") from e
    if seed < 0:
        raise ConfigError(f"{SEED_ENV} must be nonnegative", context="config")
    return seed


def load_options(path: str | Path | None = None, **overrides: Any) -> SolverOptions:
    """Build SolverOptions from an optional YAML file plus overrides.

    Keys missing from the file take the model defaults, except ``seed`` which
    falls back to ``RANDCHOL_SEED``. Overrides whose value is ``None`` are
    ignored; ``ordering`` overrides are merged key by key.

    Args:
        path: YAML file with SolverOptions fields.
        **overrides: Values taking precedence over the file.

    Returns:
        SolverOptions: Validated options.

    Raises:
        ConfigError: If the file cannot be read or fails validation.
    """
    data: dict[str, Any] = {}
    if path is not None:
        try:
            loaded = yaml.safe_load(Path(path).read_text())
        except (OSError, yaml.YAMLError) as e:
            raise ConfigError(f"cannot read config file: {e}", context=str(path)) from e
        if loaded is not None and not isinstance(loaded, dict):
            raise ConfigError("config file must hold a mapping", context=str(path))
        data = loaded or {}
    data.setdefault("seed", default_seed())
    for key, value in overrides.items():
        if value is None:
            continue
        if key == "ordering" and isinstance(value, dict):
            merged = dict(data.get("ordering") or {})
            merged.update({k: v for k, v in value.items() if v is not None})
            data["ordering"] = merged
        else:
            data[key] = value
    try:
        options = SolverOptions.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"invalid solver options: {e}", context="config") from e
    logger.debug("solver options: %s", options.model_dump(mode="json"))
    return options
