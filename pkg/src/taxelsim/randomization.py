"""Seeded domain randomization.

Environment ``i`` of a run with master seed ``s`` draws from
``PCG64(SeedSequence(s, spawn_key=(i,)))``. Streams therefore depend only on
``(s, i)``: no environment can shift another's draws, however many values it
consumes or whichever thread runs it.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial.transform import Rotation

from taxelsim.actuator import ActuatorParams, ActuatorRanges, sample_params
from taxelsim.errors import ConfigError
from taxelsim.kinematics import N_DOF

SCALAR_FIELDS = ("object_mass", "object_scale", "friction", "restitution", "damping", "drop_height")
NON_NEGATIVE = ("friction", "restitution", "damping")


@dataclass(frozen=True, kw_only=True)
class RandomizationSpec:
    """Sampling intervals for one episode; defaults are artifact choices."""

    object_mass: tuple = (0.05, 0.2)
    object_scale: tuple = (0.9, 1.1)
    friction: tuple = (0.5, 1.2)
    restitution: tuple = (0.0, 0.2)
    damping: tuple = (0.5, 2.0)
    drop_height: tuple = (0.10, 0.15)
    initial_orientation: bool = True
    actuator: ActuatorRanges = field(default_factory=ActuatorRanges)
    f_cmd: tuple = (0.0, 1.0)

    def validate(self, path: str = "randomization") -> None:
        for name in SCALAR_FIELDS + ("f_cmd",):
            interval = getattr(self, name)
            if len(interval) != 2:
                raise ConfigError(f"{path}.{name}", "expected [low, high]")
            low, high = interval
            if not (np.isfinite(low) and np.isfinite(high)):
                raise ConfigError(f"{path}.{name}", "bounds must be finite")
            if low > high:
                raise ConfigError(f"{path}.{name}[1]", f"high {high} is below low {low}")
        for name in NON_NEGATIVE:
            if getattr(self, name)[0] < 0:
                raise ConfigError(f"{path}.{name}[0]", "must be non-negative")
        if self.object_mass[0] <= 0:
            raise ConfigError(f"{path}.object_mass[0]", "must be positive")
        if self.object_scale[0] <= 0:
            raise ConfigError(f"{path}.object_scale[0]", "must be positive")
        if self.f_cmd[0] < 0 or self.f_cmd[1] > 1:
            raise ConfigError(f"{path}.f_cmd", "must lie within [0, 1]")
        self.actuator.validate(f"{path}.actuator")

    @classmethod
    def from_dict(cls, data: Optional[dict], path: str = "randomization") -> RandomizationSpec:
        data = dict(data or {})
        known = set(SCALAR_FIELDS) | {"initial_orientation", "actuator", "f_cmd"}
        for key in data:
            if key not in known:
                raise ConfigError(f"{path}.{key}", "unknown field")
        values: dict = {}
        for name in SCALAR_FIELDS + ("f_cmd",):
            if name in data:
                try:
                    values[name] = tuple(float(x) for x in data[name])
                except (TypeError, ValueError) as e:
                    raise ConfigError(f"{path}.{name}", "expected [low, high]") from e
        if "initial_orientation" in data:
            values["initial_orientation"] = bool(data["initial_orientation"])
        if "actuator" in data:
            values["actuator"] = ActuatorRanges.from_dict(data["actuator"], f"{path}.actuator")
        spec = cls(**values)
        spec.validate(path)
        return spec

    def to_dict(self) -> dict:
        out = {name: list(getattr(self, name)) for name in SCALAR_FIELDS + ("f_cmd",)}
        out["initial_orientation"] = self.initial_orientation
        out["actuator"] = self.actuator.to_dict()
        return out


@dataclass(frozen=True)
class EpisodeDraw:
    seed: int
    stream_index: int
    object_mass: float
    object_scale: float
    friction: float
    restitution: float
    damping: float
    drop_height: float
    orientation: np.ndarray
    actuator: ActuatorParams
    f_cmd: float

    def to_dict(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if k not in ("orientation", "actuator")}
        out["orientation"] = np.asarray(self.orientation).tolist()
        out["actuator"] = self.actuator.to_dict()
        return out


def make_stream(master_seed: int, index: int) -> np.random.Generator:
    """The splitting function: stream ``index`` of ``master_seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(master_seed, spawn_key=(index,))))


def make_streams(master_seed: int, n_envs: int, start: int = 0) -> list[np.random.Generator]:
    """Streams ``start .. start + n_envs - 1``; ``start`` lets a worker own a slice of a batch."""
    if n_envs < 1:
        raise ConfigError("envs", f"need at least one environment, got {n_envs}")
    return [make_stream(master_seed, start + i) for i in range(n_envs)]


def draw_episode(
    spec: RandomizationSpec, stream: np.random.Generator, seed: int = 0, stream_index: int = 0, n_joints: int = N_DOF
) -> EpisodeDraw:
    """Sample one episode.

    Values are drawn in a fixed order (the scalar fields, the orientation,
    the actuator parameters joint-vector by field, then ``F_cmd``) so the
    record replays exactly from ``(seed, stream_index)``.
    """
    spec.validate()
    scalars = {name: float(stream.uniform(*getattr(spec, name))) for name in SCALAR_FIELDS}
    if spec.initial_orientation:
        # scipy samples unit quaternions uniformly on the 3-sphere.
        orientation = Rotation.random(random_state=stream).as_matrix()
    else:
        orientation = np.eye(3)
    actuator = sample_params(spec.actuator, stream, n_joints=n_joints)
    f_cmd = float(stream.uniform(*spec.f_cmd))
    return EpisodeDraw(
        seed=seed,
        stream_index=stream_index,
        orientation=orientation,
        actuator=actuator,
        f_cmd=f_cmd,
        **scalars,
    )
