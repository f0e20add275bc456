import json
import os
from importlib import resources
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Callable, Optional, Union

import numpy as np
from langchain_core.runnables import RunnableConfig

from taxelsim.calibration import CalibrationMap, load_calibration
from taxelsim.errors import ConfigError, TaxelSimError
from taxelsim.geometry import ObjectShape, Sphere, shape_from_dict
from taxelsim.kinematics import N_DOF
from taxelsim.randomization import RandomizationSpec
from taxelsim.rewards import GraspRewardConfig, RotationRewardConfig
from taxelsim.tactile import CENTER_MODES, ContactMaterial
from taxelsim.utils import dataclass_from_dict

TASKS = ("grasp", "rotate")
ORIENTATION_MODES = ("6d", "quaternion", "none")


# Configuration field -> (environment variable, parser)
ENVIRONMENT: dict[str, tuple[str, Callable[[Any], Any]]] = {
    "threads": ("TAXELSIM_THREADS", int),
    "log_level": ("TAXELSIM_LOG_LEVEL", str),
    "trace_precision": ("TAXELSIM_TRACE_PRECISION", int),
    "hand_model": ("TAXELSIM_HAND_MODEL", str),
}


@dataclass(kw_only=True)
class Configuration:
    """Runtime knobs, read from ``TAXELSIM_*`` environment variables."""
    threads: int = field(default_factory=lambda: os.cpu_count() or 1)
    log_level: str = "INFO"
    trace_precision: int = 17
    hand_model: Optional[str] = None

    @classmethod
    def from_runnable_config(
        cls, config: Optional[RunnableConfig] = None
    ) -> "Configuration":
        """Create a Configuration instance from a RunnableConfig.

        A set environment variable wins over the ``configurable`` key of the
        same field; empty values fall back to the defaults.
        """
        configurable = (
            config["configurable"] if config and "configurable" in config else {}
        )
        values: dict[str, Any] = {}
        for name, (env_var, parse) in ENVIRONMENT.items():
            raw = os.environ.get(env_var) or configurable.get(name)
            if not raw:
                continue
            try:
                values[name] = parse(raw)
            except ValueError:
                raise ConfigError(env_var, f"cannot parse {raw!r}") from None
        return cls(**values)


@dataclass(frozen=True, kw_only=True)
class ObjectConfig:
    shape: ObjectShape = field(default_factory=lambda: Sphere(0.035))
    density: float = 500.0
    friction: float = 0.8
    initial_position: tuple = (0.0, 0.0, 0.12)

    def nominal_mass(self) -> float:
        return float(self.shape.mass_properties(self.density)[0])


@dataclass(frozen=True, kw_only=True)
class ObservationOptions:
    """Which optional observation slices are present and how they are derived."""

    orientation: str = "6d"
    contact_center: str = "force_weighted"
    contact_force: bool = True
    position_noise: float = 0.0
    finite_difference_velocity: bool = False

    def __post_init__(self):
        if self.orientation not in ORIENTATION_MODES:
            raise ConfigError("observation.orientation", f"expected one of {ORIENTATION_MODES}")
        if self.contact_center not in CENTER_MODES + ("none",):
            raise ConfigError("observation.contact_center", f"expected one of {CENTER_MODES + ('none',)}")
        if self.position_noise < 0:
            raise ConfigError("observation.position_noise", "must be non-negative")


@dataclass(frozen=True, kw_only=True)
class HoldCriterion:
    """Stable grasp: slow object touched by enough fingers for enough steps."""

    max_speed: float = 0.05
    min_fingers: int = 2
    steps: int = 30


@dataclass(frozen=True, kw_only=True)
class EpisodeConfig:
    task: str = "grasp"
    hand_model: Optional[str] = None
    object: ObjectConfig = field(default_factory=ObjectConfig)
    material: ContactMaterial = field(default_factory=ContactMaterial)
    randomization: RandomizationSpec = field(default_factory=RandomizationSpec)
    rewards: Union[GraspRewardConfig, RotationRewardConfig] = field(default_factory=GraspRewardConfig)
    calibration: Optional[str] = None
    torque_max: float = 1.0
    max_steps: int = 200
    dt: float = 1.0 / 60.0
    substeps: int = 4
    gravity: float = 9.81
    joint_inertia: float = 0.005
    joint_damping: float = 0.05
    floor_height: float = 0.0
    rotation_axis: tuple = (0.0, 0.0, 1.0)
    hold: HoldCriterion = field(default_factory=HoldCriterion)
    observation: ObservationOptions = field(default_factory=ObservationOptions)
    force_to_newton: float = 0.05
    friction_regularization: float = 10.0

    def calibration_map(self) -> CalibrationMap:
        """The map behind the joint-torque slot; ``torque_max`` for every joint without a file."""
        if self.calibration is None:
            return CalibrationMap.from_torque_limits(self.torque_max, N_DOF)
        return load_calibration(self.calibration)

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "hand_model": self.hand_model,
            "object": {
                "shape": self.object.shape.to_dict(),
                "density": self.object.density,
                "friction": self.object.friction,
                "initial_position": list(self.object.initial_position),
            },
            "material": self.material.to_dict(),
            "randomization": self.randomization.to_dict(),
            "rewards": self.rewards.to_dict(),
            "calibration": self.calibration,
            "torque_max": self.torque_max,
            "max_steps": self.max_steps,
            "dt": self.dt,
            "substeps": self.substeps,
            "gravity": self.gravity,
            "joint_inertia": self.joint_inertia,
            "joint_damping": self.joint_damping,
            "floor_height": self.floor_height,
            "rotation_axis": list(self.rotation_axis),
            "hold": vars(self.hold).copy(),
            "observation": vars(self.observation).copy(),
            "force_to_newton": self.force_to_newton,
            "friction_regularization": self.friction_regularization,
        }


def _resolve(path: Optional[str], base_dir: Optional[Path]) -> Optional[str]:
    if path is None or base_dir is None or Path(path).is_absolute():
        return path
    return str(base_dir / path)


def _positive(data: dict, key: str, default: float) -> float:
    value = data.get(key, default)
    try:
        value = float(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(key, "expected a number") from e
    if not value > 0:
        raise ConfigError(key, "must be positive")
    return value


def _object_config(data: dict, base_dir: Optional[Path]) -> ObjectConfig:
    if not isinstance(data, dict):
        raise ConfigError("object", "expected an object")
    values: dict[str, Any] = {}
    if "shape" in data:
        values["shape"] = shape_from_dict(data["shape"], base_dir, "object.shape")
    for key in ("density", "friction"):
        if key in data:
            values[key] = float(data[key])
    if values.get("density", 1.0) <= 0:
        raise ConfigError("object.density", "must be positive")
    if values.get("friction", 0.0) < 0:
        raise ConfigError("object.friction", "must be non-negative")
    if "initial_position" in data:
        position = tuple(float(x) for x in data["initial_position"])
        if len(position) != 3:
            raise ConfigError("object.initial_position", "expected a 3-vector")
        values["initial_position"] = position
    unknown = set(data) - {"shape", "density", "friction", "initial_position"}
    if unknown:
        raise ConfigError(f"object.{sorted(unknown)[0]}", "unknown field")
    return ObjectConfig(**values)


def episode_config_from_dict(data: dict, base_dir: Optional[Path] = None) -> EpisodeConfig:
    """Validate a parsed episode document.

    Mass and friction intervals that are not given collapse to the object's
    own nominal value, so the object block stays authoritative; the other
    intervals keep their RandomizationSpec defaults.
    """
    if not isinstance(data, dict):
        raise ConfigError("", "episode config must be a JSON object")
    known = {f.name for f in fields(EpisodeConfig)}
    for key in data:
        if key not in known:
            raise ConfigError(key, "unknown field")
    task = data.get("task", "grasp")
    if task not in TASKS:
        raise ConfigError("task", f"expected one of {TASKS}, got {task!r}")

    obj = _object_config(data.get("object", {}), base_dir)
    material = ContactMaterial.from_dict(data.get("material", {}))

    randomization = dict(data.get("randomization") or {})
    randomization.setdefault("object_mass", [obj.nominal_mass()] * 2)
    randomization.setdefault("friction", [obj.friction] * 2)
    if task == "rotate":
        randomization.setdefault("initial_orientation", False)
    spec = RandomizationSpec.from_dict(randomization)

    reward_cls = GraspRewardConfig if task == "grasp" else RotationRewardConfig
    rewards = reward_cls.from_dict(data.get("rewards", {}))

    axis = tuple(float(x) for x in data.get("rotation_axis", (0.0, 0.0, 1.0)))
    if len(axis) != 3 or not np.linalg.norm(axis) > 0:
        raise ConfigError("rotation_axis", "expected a nonzero 3-vector")

    max_steps = data.get("max_steps", 200)
    substeps = data.get("substeps", 4)
    if not isinstance(max_steps, int) or max_steps < 1:
        raise ConfigError("max_steps", "must be an integer >= 1")
    if not isinstance(substeps, int) or substeps < 1:
        raise ConfigError("substeps", "must be an integer >= 1")

    config = EpisodeConfig(
        task=task,
        hand_model=_resolve(data.get("hand_model"), base_dir),
        object=obj,
        material=material,
        randomization=spec,
        rewards=rewards,
        calibration=_resolve(data.get("calibration"), base_dir),
        torque_max=_positive(data, "torque_max", 1.0),
        max_steps=max_steps,
        dt=_positive(data, "dt", 1.0 / 60.0),
        substeps=substeps,
        gravity=float(data.get("gravity", 9.81)),
        joint_inertia=_positive(data, "joint_inertia", 0.005),
        joint_damping=float(data.get("joint_damping", 0.05)),
        floor_height=float(data.get("floor_height", 0.0)),
        rotation_axis=axis,
        hold=dataclass_from_dict(HoldCriterion, data.get("hold"), "hold"),
        observation=dataclass_from_dict(ObservationOptions, data.get("observation"), "observation"),
        force_to_newton=_positive(data, "force_to_newton", 0.05),
        friction_regularization=_positive(data, "friction_regularization", 10.0),
    )
    if config.joint_damping < 0:
        raise ConfigError("joint_damping", "must be non-negative")
    return config


def packaged_config_path(name: str) -> Path:
    """Path of a bundled example episode config (``grasp`` or ``rotate``)."""
    return Path(str(resources.files("taxelsim") / "data" / f"{name}.json"))


def load_episode_config(source: Union[str, Path, dict]) -> EpisodeConfig:
    """Load and validate an episode config from a JSON file or a parsed dict.

    Raises:
        ConfigError: naming the JSON path of the first invalid or missing field.
    """
    base_dir = None
    if isinstance(source, dict):
        data = source
    else:
        path = Path(source)
        base_dir = path.parent
        try:
            data = json.loads(path.read_text())
        except FileNotFoundError as e:
            raise ConfigError("config", f"no such file: {path}") from e
        except json.JSONDecodeError as e:
            raise ConfigError("config", f"invalid JSON in {path}: {e}") from e
    try:
        return episode_config_from_dict(data, base_dir)
    except ConfigError:
        raise
    except TaxelSimError as e:
        raise ConfigError("config", str(e)) from e


def resolve_episode_config(source: Union[EpisodeConfig, str, Path, dict, None]) -> EpisodeConfig:
    """Accept a loaded config, a bundled task name, a JSON path or a parsed dict.

    ``None`` selects the bundled grasp config.
    """
    if isinstance(source, EpisodeConfig):
        return source
    if source is None:
        source = "grasp"
    if isinstance(source, str) and source in TASKS and not Path(source).exists():
        source = packaged_config_path(source)
    return load_episode_config(source)
