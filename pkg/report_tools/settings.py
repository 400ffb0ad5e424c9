"""Load, merge and write the JSON settings file shared by the CLI and the library options"""
from __future__ import annotations

import copy
import dataclasses
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from channel_models.errors import ConfigError
from linear_programs.asymptotics import AsymptoticOptions
from linear_programs.lp_core import SolverOptions

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Limits:
    """Size guards

    explicit_entries: largest |A|^n |B|^n tensor power built explicitly
    joint_types: largest number of joint types a reduced program may use
    """

    explicit_entries: int = 10**7
    joint_types: int = 2_000_000


@dataclass(frozen=True)
class ReportOptions:
    """significant_digits of floats in reports, worker threads used by sweeps"""

    significant_digits: int = 12
    workers: int = 1


SECTIONS: dict[str, type] = {
    "solver": SolverOptions,
    "limits": Limits,
    "asymptotics": AsymptoticOptions,
    "report": ReportOptions,
}


def _section_defaults(options_type: type) -> dict[str, Any]:
    return {item.name: item.default for item in dataclasses.fields(options_type)}


DEFAULT_CONFIG: dict[str, dict[str, Any]] = {
    name: _section_defaults(options_type) for name, options_type in SECTIONS.items()
}


@dataclass(frozen=True)
class Settings:
    """Typed view of every section of a config document"""

    solver: SolverOptions = field(default_factory=SolverOptions)
    limits: Limits = field(default_factory=Limits)
    asymptotics: AsymptoticOptions = field(default_factory=AsymptoticOptions)
    report: ReportOptions = field(default_factory=ReportOptions)

    @classmethod
    def from_config(cls, config: dict[str, dict[str, Any]]) -> Settings:
        """Build the typed view of a merged config dict"""
        return cls(
            **{name: SECTIONS[name](**config[name]) for name in SECTIONS}  # type: ignore[arg-type]
        )


def _coerce(section: str, key: str, value: Any, default: Any) -> Any:
    """Bring a JSON value to the type of its default, ints may stand in for floats"""
    if isinstance(default, bool) or isinstance(value, bool):
        raise ConfigError(f"{section}.{key} cannot be a boolean")
    if isinstance(default, int):
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        if not isinstance(value, int):
            raise ConfigError(f"{section}.{key} must be an integer, got {value!r}")
        return value
    if not isinstance(value, (int, float)):
        raise ConfigError(f"{section}.{key} must be a number, got {value!r}")
    return float(value)


def merge_config(overrides: dict[str, Any]) -> dict[str, dict[str, Any]]:
    """Merge a partial config over the defaults section by section

    Raises:
        ConfigError: unknown sections or keys, or values of the wrong type
    """
    if not isinstance(overrides, dict):
        raise ConfigError("config must be a JSON object of sections")
    config = copy.deepcopy(DEFAULT_CONFIG)
    for section, values in overrides.items():
        if section not in config:
            raise ConfigError(f"unknown config section {section!r}")
        if not isinstance(values, dict):
            raise ConfigError(f"config section {section!r} must be an object")
        for key, value in values.items():
            if key not in config[section]:
                raise ConfigError(f"unknown key {key!r} in config section {section!r}")
            config[section][key] = _coerce(section, key, value, DEFAULT_CONFIG[section][key])
    return config


def load_config(path: str | Path | None = None) -> Settings:
    """Load the settings from a json file, or the defaults when no file is given

    Example:
        ```
        settings = load_config("example_config.json")
        settings.solver.feasibility_tol  # 1e-09
        ```

    Args:
        path (str | Path, optional): config file. Defaults to None.

    Raises:
        ConfigError: the file is not valid JSON or holds unknown keys
        FileNotFoundError: the file does not exist

    Returns:
        Settings: typed settings
    """
    if path is None:
        return Settings()
    with open(path, "r", encoding="utf-8") as config_file:
        try:
            overrides = json.load(config_file)
        except json.JSONDecodeError as err:
            raise ConfigError(f"{path} is not valid JSON: {err}") from err
    logger.debug("loaded config from %s", path)
    return Settings.from_config(merge_config(overrides))


def write_config(settings: Settings, path: str | Path) -> None:
    """Write every section as an indented JSON document"""
    document = {name: dataclasses.asdict(getattr(settings, name)) for name in SECTIONS}
    with open(path, "w", encoding="utf-8") as config_file:
        json.dump(document, config_file, indent=4)
        config_file.write("\n")
