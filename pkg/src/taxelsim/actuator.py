"""Non-ideal joint actuator: PD control, backlash deadband, torque-speed envelope.

All functions broadcast over numpy arrays, so one call covers every joint of
every environment. ``ActuatorParams`` fields may be scalars or arrays of a
shape that broadcasts against the joint arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from taxelsim.errors import ConfigError

PARAM_NAMES = ("kp", "kd", "backlash_eps", "stall_torque", "no_load_speed", "efficiency")


@dataclass(frozen=True)
class ActuatorParams:
    kp: np.ndarray | float
    kd: np.ndarray | float
    backlash_eps: np.ndarray | float
    stall_torque: np.ndarray | float
    no_load_speed: np.ndarray | float
    efficiency: np.ndarray | float

    def validate(self) -> None:
        checks = {
            "kp": np.all(np.asarray(self.kp) > 0),
            "kd": np.all(np.asarray(self.kd) >= 0),
            "backlash_eps": np.all(np.asarray(self.backlash_eps) >= 0),
            "stall_torque": np.all(np.asarray(self.stall_torque) > 0),
            "no_load_speed": np.all(np.asarray(self.no_load_speed) > 0),
            "efficiency": np.all((np.asarray(self.efficiency) > 0) & (np.asarray(self.efficiency) <= 1)),
        }
        for name, ok in checks.items():
            if not ok:
                raise ConfigError(f"actuator.{name}", "value outside its valid range")

    def select(self, index) -> ActuatorParams:
        """Parameters of a subset of actuators (array fields only)."""
        return ActuatorParams(**{f.name: np.asarray(getattr(self, f.name))[index] for f in fields(self)})

    def to_dict(self) -> dict:
        return {name: np.asarray(getattr(self, name)).tolist() for name in PARAM_NAMES}


@dataclass(frozen=True)
class ActuatorRanges:
    """Per-episode sampling intervals; defaults are artifact choices, not measured values."""

    kp: tuple = (2.0, 4.0)
    kd: tuple = (0.05, 0.15)
    backlash_eps: tuple = (0.0, 0.02)
    stall_torque: tuple = (0.8, 1.2)
    no_load_speed: tuple = (6.0, 10.0)
    efficiency: tuple = (0.7, 1.0)

    def validate(self, path: str = "randomization.actuator") -> None:
        for name in PARAM_NAMES:
            interval = getattr(self, name)
            if len(interval) != 2:
                raise ConfigError(f"{path}.{name}", "expected [low, high]")
            low, high = interval
            if low > high:
                raise ConfigError(f"{path}.{name}", f"low {low} > high {high}")
        lows = ActuatorParams(**{n: getattr(self, n)[0] for n in PARAM_NAMES})
        highs = ActuatorParams(**{n: getattr(self, n)[1] for n in PARAM_NAMES})
        try:
            lows.validate()
            highs.validate()
        except ConfigError as e:
            raise ConfigError(f"{path}.{e.path.split('.')[-1]}", "interval allows invalid values") from e

    @classmethod
    def from_dict(cls, data: dict, path: str = "randomization.actuator") -> ActuatorRanges:
        unknown = set(data) - set(PARAM_NAMES)
        if unknown:
            raise ConfigError(f"{path}.{sorted(unknown)[0]}", "unknown actuator parameter")
        ranges = cls(**{k: tuple(float(x) for x in v) for k, v in data.items()})
        ranges.validate(path)
        return ranges

    def to_dict(self) -> dict:
        return {name: list(getattr(self, name)) for name in PARAM_NAMES}


def pd_torque(params: ActuatorParams, q_ref, q_m, qd_ref, qd_m):
    """``kp * (q_ref - q_m) + kd * (qd_ref - qd_m)``."""
    return params.kp * (np.asarray(q_ref) - q_m) + params.kd * (np.asarray(qd_ref) - qd_m)


def apply_backlash(params: ActuatorParams, tau_c, q_ref, q_m):
    """Zero torque while the position error is inside the gear-play deadband."""
    inside = np.abs(np.asarray(q_ref) - q_m) < params.backlash_eps
    return np.where(inside, 0.0, tau_c)


def torque_envelope(params: ActuatorParams, qd):
    """Deliverable torque magnitude at speed ``qd``, floored at zero past no-load speed."""
    return params.stall_torque * np.maximum(0.0, 1.0 - np.abs(qd) / params.no_load_speed)


def saturate(params: ActuatorParams, tau_b, qd):
    envelope = torque_envelope(params, qd)
    return params.efficiency * np.clip(tau_b, -envelope, envelope)


def step_actuator(params: ActuatorParams, q_ref, q_m, qd_ref=0.0, qd_m=0.0):
    """Applied torque for position targets ``q_ref``; ``qd_ref`` defaults to 0."""
    tau_c = pd_torque(params, q_ref, q_m, qd_ref, qd_m)
    tau_b = apply_backlash(params, tau_c, q_ref, q_m)
    return saturate(params, tau_b, qd_m)


def sample_params(ranges: ActuatorRanges, rng: np.random.Generator, n_joints: Optional[int] = None) -> ActuatorParams:
    """Draw actuator parameters uniformly from ``ranges``.

    With ``n_joints`` every field is an array with one value per joint, drawn
    field by field in the order of ``PARAM_NAMES``.

    Raises:
        ConfigError: if an interval has ``low > high``.
    """
    ranges.validate()
    values = {}
    for name in PARAM_NAMES:
        low, high = getattr(ranges, name)
        values[name] = rng.uniform(low, high, size=n_joints)
        if n_joints is None:
            values[name] = float(values[name])
    return ActuatorParams(**values)
