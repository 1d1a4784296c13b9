"""YAML configuration ingestion for robots, gains and scenarios.

Files are flat key-value trees in SI units; angular quantities use degree
keys with a ``_deg`` suffix and are converted on load. Unknown keys are
rejected so that typos fail loudly instead of silently running defaults.
"""

from __future__ import annotations

import json
import os
from dataclasses import fields, replace
from pathlib import Path

import numpy as np
import yaml

from .control import ControlGains
from .gait import GaitConfig
from .model import RobotDescription
from .scenarios import ScenarioConfig

ENV_CONFIG_DIR = "VECTORQUAD_CONFIG_DIR"

_ROBOT_DEG = {"joint_limit_deg": "joint_limit", "leg_angles_deg": "leg_angles"}
_GAIT_DEG = {
    "touchdown_threshold_deg": "touchdown_threshold",
    "settle_tol_deg": "settle_tol",
    "stance_hip_pitch_deg": "stance_hip_pitch",
    "stance_knee_pitch_deg": "stance_knee_pitch",
}
_SCENARIO_DEG = {
    "transform_hip_deg": "transform_hip",
    "transform_knee_deg": "transform_knee",
}
_GAIN_DIAGONALS = ("pos_p", "pos_i", "pos_d", "att_p", "att_i", "att_d",
                   "att_int_limit")


def config_dir() -> Path:
    """Directory searched for default config files.

    The ``VECTORQUAD_CONFIG_DIR`` environment variable overrides the
    packaged data directory.
    """
    env = os.environ.get(ENV_CONFIG_DIR)
    if env:
        return Path(env)
    return Path(__file__).parent / "data"


def _load_mapping(path) -> dict:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a mapping at top level")
    return data


def _convert_degrees(data: dict, table: dict[str, str]) -> dict:
    out = dict(data)
    for deg_key, field_name in table.items():
        if deg_key in out:
            if field_name in out:
                raise ValueError(
                    f"both {deg_key} and {field_name} given; pick one")
            value = out.pop(deg_key)
            if isinstance(value, (list, tuple)):
                out[field_name] = tuple(np.deg2rad(float(v)) for v in value)
            else:
                out[field_name] = float(np.deg2rad(float(value)))
    return out


def _check_keys(data: dict, cls, label: str) -> None:
    allowed = {f.name for f in fields(cls) if f.init}
    unknown = set(data) - allowed
    if unknown:
        raise ValueError(f"{label}: unknown keys {sorted(unknown)}")


def load_robot(path) -> RobotDescription:
    """Robot geometry/mass/limit overrides on top of the built-in vehicle."""
    data = _convert_degrees(_load_mapping(path), _ROBOT_DEG)
    if "leg_angles" in data:
        data["leg_angles"] = tuple(float(v) for v in data["leg_angles"])
    if "torso_size" in data:
        data["torso_size"] = tuple(float(v) for v in data["torso_size"])
    _check_keys(data, RobotDescription, "robot config")
    return RobotDescription(**data)


def load_gains(path) -> ControlGains:
    """Control gain overrides; 3-vectors are per-axis (x, y, z) gains."""
    data = _load_mapping(path)
    for key in _GAIN_DIAGONALS:
        if key in data:
            vec = np.asarray(data[key], dtype=float)
            if vec.shape != (3,):
                raise ValueError(f"gains: {key} must be a 3-vector")
            data[key] = vec
    _check_keys(data, ControlGains, "gains config")
    return ControlGains(**data)


def load_scenario(path, base: ScenarioConfig | None = None) -> ScenarioConfig:
    """Scenario overrides, with an optional nested ``gait`` block."""
    data = _convert_degrees(_load_mapping(path), _SCENARIO_DEG)
    gait_data = _convert_degrees(data.pop("gait", {}), _GAIT_DEG)
    _check_keys(gait_data, GaitConfig, "scenario config: gait")
    _check_keys(data, ScenarioConfig, "scenario config")
    scen = replace(base, **data) if base is not None else ScenarioConfig(**data)
    if gait_data:
        scen = replace(scen, gait=replace(scen.gait, **gait_data))
    return scen


def summary_schema() -> dict:
    """The published JSON schema for run summaries."""
    with open(Path(__file__).parent / "data" / "summary.schema.json") as fh:
        return json.load(fh)


def sanitize(value):
    """Recursively convert numpy scalars/arrays into JSON-native types."""
    if isinstance(value, np.ndarray):
        return [sanitize(v) for v in value.tolist()]
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    if isinstance(value, dict):
        return {k: sanitize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [sanitize(v) for v in value]
    return value
