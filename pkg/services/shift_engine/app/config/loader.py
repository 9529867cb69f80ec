"""
Flat key-value experiment configs.

    # comment
    setting = classification
    gamma = 0.25
    snapshots = 0, 25, 50
    sweep.subspace_rank = 60, 100, 140      (sweep files only)

Keys are ExperimentConfig fields; unknown keys are errors.
"""
import itertools
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple

from pydantic import ValidationError

from ..core.errors import ConfigError
from ..schemas import ExperimentConfig

SWEEP_PREFIX = "sweep."


def parse_flat(text: str) -> Dict[str, str]:
    values: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}", "empty key")
        if key in values:
            raise ConfigError(key, "duplicate key")
        values[key] = value
    return values


def read_config_file(path) -> Dict[str, str]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError("config", f"file not found: {path}")
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError("config", f"cannot read {path}: {e}") from e
    return parse_flat(text)


def build_config(values: Mapping[str, object]) -> ExperimentConfig:
    """Validate raw values, turning pydantic errors into ConfigError(field)."""
    try:
        return ExperimentConfig(**values)
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(part) for part in first["loc"]) or "config"
        message = "unknown key" if first["type"] == "extra_forbidden" else first["msg"]
        raise ConfigError(field, message) from e


def _split_sweep(values: Mapping[str, str]) -> Tuple[Dict[str, str], Dict[str, List[str]]]:
    base: Dict[str, str] = {}
    grid: Dict[str, List[str]] = {}
    for key, value in values.items():
        if key.startswith(SWEEP_PREFIX):
            name = key[len(SWEEP_PREFIX):]
            options = [item.strip() for item in value.split(",") if item.strip()]
            if not options:
                raise ConfigError(key, "sweep needs at least one value")
            grid[name] = options
        else:
            base[key] = value
    return base, grid


def load_config(path, overrides: Optional[Mapping[str, object]] = None) -> ExperimentConfig:
    values: Dict[str, object] = dict(read_config_file(path))
    sweep_keys = [k for k in values if k.startswith(SWEEP_PREFIX)]
    if sweep_keys:
        raise ConfigError(sweep_keys[0], "sweep keys are only valid for the sweep command")
    values.update(overrides or {})
    return build_config(values)


def load_sweep(path, overrides: Optional[Mapping[str, object]] = None) -> List[ExperimentConfig]:
    """Cartesian product of the sweep.* lists over the base config."""
    base, grid = _split_sweep(read_config_file(path))
    merged: Dict[str, object] = dict(base)
    merged.update(overrides or {})
    if not grid:
        return [build_config(merged)]
    names = list(grid)
    configs = []
    for combo in itertools.product(*(grid[name] for name in names)):
        values = dict(merged)
        values.update(zip(names, combo))
        configs.append(build_config(values))
    return configs
