import os
from dotenv import load_dotenv
from pathlib import Path
from typing import Any, Dict, Optional, Union

import yaml

# File section -> keys it may contain, all flattened onto RunConfig fields
SECTIONS = {
    "run": {"case", "scheme", "t_end", "max_steps", "seed", "perturbed", "p2_variant"},
    "grid": {"nx", "ny"},
    "numerics": {"eps", "cfl", "weights", "solver_tol", "solver_max_iter", "workers"},
    "output": {"out", "format", "snapshot_every", "quiet"},
}

ENV_DEFAULTS = {
    "SOLVER_OUTPUT_DIR": ("out", str),
    "SOLVER_WORKERS": ("workers", int),
}


def load_env() -> Dict[str, Any]:
    """
    Load the .env file of the project root and read the solver's environment defaults.

    Returns:
        Dict[str, Any]: RunConfig fields set through the environment, plus ``log_level``
    """
    project_root = Path(__file__).resolve().parent.parent.parent
    env_file = project_root / ".env"
    load_dotenv(env_file)

    config: Dict[str, Any] = {"log_level": os.getenv("SOLVER_LOG_LEVEL", "INFO").upper()}
    for var, (key, cast) in ENV_DEFAULTS.items():
        value = os.getenv(var)
        if value:
            try:
                config[key] = cast(value)
            except ValueError as e:
                raise ValueError(f"Invalid value for environment variable {var}: {value!r}") from e
    return config


def load_config(path: Optional[Union[str, Path]] = None) -> Dict[str, Any]:
    """
    Load run settings from the environment and an optional YAML file.

    The file holds the sections run, grid, numerics and output; their keys are
    flattened. File values override environment defaults.

    Args:
        path: YAML config file, or None for environment defaults only

    Returns:
        Dict[str, Any]: Flat mapping of RunConfig fields plus ``log_level``

    Raises:
        ValueError: On an unreadable file, an unknown section or an unknown key
    """
    config = load_env()
    if path is None:
        return config

    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text()) or {}
    except (OSError, yaml.YAMLError) as e:
        raise ValueError(f"Cannot read config file {path}: {e}") from e
    if not isinstance(raw, dict):
        raise ValueError(f"Config file {path} must contain a mapping of sections")

    for section, values in raw.items():
        if section not in SECTIONS:
            raise ValueError(f"Unknown config section {section!r}, expected one of {sorted(SECTIONS)}")
        if not isinstance(values, dict):
            raise ValueError(f"Config section {section!r} must be a mapping")
        unknown = set(values) - SECTIONS[section]
        if unknown:
            raise ValueError(f"Unknown keys in section {section!r}: {sorted(unknown)}")
        config.update(values)
    return config
