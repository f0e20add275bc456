"""Current-to-torque calibration.

Contact force is linear in motor current on hardware (``F = alpha * I``) and in
joint torque in simulation (``F = beta * tau``). Normalizing each drive signal
by its maximum gives a dimensionless force proxy in [0, 1] that means the same
thing on both sides, which is what fills the joint-torque observation slot.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np
import pandas as pd

from taxelsim.errors import ConfigError, DegenerateFitError

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
SHARED_JOINT = -1
CSV_COLUMNS = ("joint_id", "drive_signal", "contact_force", "domain")
DOMAINS = ("real", "sim")


@dataclass(frozen=True)
class CalibrationSample:
    drive_signal: float
    contact_force: float
    joint_id: int
    domain: str = "sim"


@dataclass(frozen=True)
class LinearFit:
    slope: float
    rms_residual: float
    intercept: float = 0.0


def _arrays(samples: Sequence[CalibrationSample]):
    s = np.array([x.drive_signal for x in samples], dtype=float)
    f = np.array([x.contact_force for x in samples], dtype=float)
    if len(s) < 2 or np.all(s == s[0]):
        raise DegenerateFitError("need at least two samples with distinct drive signals")
    return s, f


def fit_linear(samples: Sequence[CalibrationSample]) -> LinearFit:
    """Through-origin least squares: ``slope = sum(s * F) / sum(s^2)``.

    Raises:
        DegenerateFitError: with fewer than two samples or a single repeated
            drive signal.
    """
    s, f = _arrays(samples)
    slope = float(np.dot(s, f) / np.dot(s, s))
    residual = f - slope * s
    return LinearFit(slope=slope, rms_residual=float(np.sqrt(np.mean(residual**2))))


def fit_affine(samples: Sequence[CalibrationSample]) -> LinearFit:
    """Least squares with an intercept, for exploring data that does not pass through zero."""
    s, f = _arrays(samples)
    design = np.stack([s, np.ones_like(s)], axis=1)
    (slope, intercept), *_ = np.linalg.lstsq(design, f, rcond=None)
    residual = f - (slope * s + intercept)
    return LinearFit(slope=float(slope), rms_residual=float(np.sqrt(np.mean(residual**2))), intercept=float(intercept))


@dataclass(frozen=True)
class JointCalibration:
    """Fitted relation for one joint; a domain without data leaves its fields unset."""

    alpha: Optional[float] = None
    beta: Optional[float] = None
    i_max: Optional[float] = None
    tau_max: Optional[float] = None
    f_max_real: Optional[float] = None
    f_max_sim: Optional[float] = None
    rms_real: Optional[float] = None
    rms_sim: Optional[float] = None

    def validate(self, path: str) -> None:
        for name in ("alpha", "beta", "i_max", "tau_max", "f_max_real", "f_max_sim"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ConfigError(f"{path}.{name}", "must be positive")


@dataclass(frozen=True)
class CalibrationMap:
    joints: dict = field(default_factory=dict)
    shared: bool = False

    def for_joint(self, joint_id: int) -> JointCalibration:
        key = SHARED_JOINT if self.shared else int(joint_id)
        if key not in self.joints:
            raise ConfigError(f"calibration.joints.{key}", "no calibration for this joint")
        return self.joints[key]

    def torque_limits(self, n_joints: int) -> np.ndarray:
        """Per-joint ``tau_max`` as an array for vectorized normalization."""
        limits = []
        for j in range(n_joints):
            tau_max = self.for_joint(j).tau_max
            if tau_max is None:
                raise ConfigError(f"calibration.joints.{j}.tau_max", "missing simulated torque maximum")
            limits.append(tau_max)
        return np.asarray(limits, dtype=float)

    @classmethod
    def from_torque_limits(cls, tau_max: Union[float, Sequence[float]], n_joints: int) -> CalibrationMap:
        limits = np.broadcast_to(np.asarray(tau_max, dtype=float), (n_joints,))
        return cls(joints={j: JointCalibration(tau_max=float(limits[j])) for j in range(n_joints)})

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "shared": self.shared,
            "joints": {str(k): {n: getattr(v, n) for n in v.__dataclass_fields__} for k, v in sorted(self.joints.items())},
        }

    @classmethod
    def from_dict(cls, data: dict) -> CalibrationMap:
        if "joints" not in data:
            raise ConfigError("calibration.joints", "missing field")
        joints = {}
        for key, value in data["joints"].items():
            entry = JointCalibration(**{k: (None if v is None else float(v)) for k, v in value.items()})
            entry.validate(f"calibration.joints.{key}")
            joints[int(key)] = entry
        return cls(joints=joints, shared=bool(data.get("shared", False)))


def _domain_fit(samples: list[CalibrationSample], intercept: bool):
    if not samples:
        return None, None, None, None
    fit = fit_affine(samples) if intercept else fit_linear(samples)
    top = max(samples, key=lambda x: x.drive_signal)
    return fit.slope, fit.rms_residual, top.drive_signal, top.contact_force


def build_calibration_map(
    samples: Iterable[CalibrationSample], shared: bool = False, intercept: bool = False
) -> CalibrationMap:
    """Fit alpha (real) and beta (sim) per joint, or once over all joints when ``shared``.

    The maxima are taken from the sample with the largest drive signal.
    """
    groups: dict[int, list[CalibrationSample]] = {}
    for sample in samples:
        if sample.domain not in DOMAINS:
            raise ConfigError("domain", f"unknown domain {sample.domain!r}")
        groups.setdefault(SHARED_JOINT if shared else sample.joint_id, []).append(sample)
    if not groups:
        raise ConfigError("samples", "no calibration samples")
    joints = {}
    for joint_id, group in sorted(groups.items()):
        try:
            alpha, rms_real, i_max, f_max_real = _domain_fit([s for s in group if s.domain == "real"], intercept)
            beta, rms_sim, tau_max, f_max_sim = _domain_fit([s for s in group if s.domain == "sim"], intercept)
        except DegenerateFitError as e:
            raise DegenerateFitError(f"joint {joint_id}: {e}") from e
        entry = JointCalibration(alpha, beta, i_max, tau_max, f_max_real, f_max_sim, rms_real, rms_sim)
        entry.validate(f"calibration.joints.{joint_id}")
        joints[joint_id] = entry
        logger.info(f"[calibrate] joint {joint_id}: alpha={alpha} (rms {rms_real}), beta={beta} (rms {rms_sim})")
    return CalibrationMap(joints=joints, shared=shared)


def normalize_current(cal: CalibrationMap, i_real: float, joint_id: int) -> float:
    """``clamp(I_real / I_max, 0, 1)``."""
    i_max = cal.for_joint(joint_id).i_max
    if i_max is None:
        raise ConfigError(f"calibration.joints.{joint_id}.i_max", "missing real current maximum")
    return float(np.clip(i_real / i_max, 0.0, 1.0))


def normalize_torque(cal: CalibrationMap, tau_sim: float, joint_id: int) -> float:
    """``clamp(tau_sim / tau_max, 0, 1)``."""
    tau_max = cal.for_joint(joint_id).tau_max
    if tau_max is None:
        raise ConfigError(f"calibration.joints.{joint_id}.tau_max", "missing simulated torque maximum")
    return float(np.clip(tau_sim / tau_max, 0.0, 1.0))


def normalize_torques(tau: np.ndarray, tau_max: np.ndarray) -> np.ndarray:
    """Vectorized ``normalize_torque`` over (..., n_joints) torques."""
    return np.clip(np.asarray(tau, dtype=float) / tau_max, 0.0, 1.0)


def samples_from_frame(frame: pd.DataFrame) -> list[CalibrationSample]:
    missing = [c for c in CSV_COLUMNS if c not in frame.columns]
    if missing:
        raise ConfigError(missing[0], "missing CSV column")
    if frame.empty:
        raise ConfigError("samples", "calibration CSV has no rows")
    if frame[["drive_signal", "contact_force"]].isna().any().any():
        raise ConfigError("samples", "calibration CSV has empty cells")
    return [
        CalibrationSample(float(r.drive_signal), float(r.contact_force), int(r.joint_id), str(r.domain).strip())
        for r in frame.itertuples(index=False)
    ]


def read_samples_csv(path: Union[str, Path]) -> list[CalibrationSample]:
    try:
        frame = pd.read_csv(path)
    except FileNotFoundError as e:
        raise ConfigError("csv", f"no such file: {path}") from e
    except pd.errors.EmptyDataError as e:
        raise ConfigError("csv", f"{path} is empty") from e
    return samples_from_frame(frame)


def synthetic_frame(
    alpha: float,
    beta: float,
    joint_ids: Sequence[int],
    n_per_joint: int,
    rng: np.random.Generator,
    noise: float = 0.0,
    drive_range: tuple = (0.0, 1.0),
) -> pd.DataFrame:
    """Quasi-static calibration data: ``F = alpha * I`` (real) and ``F = beta * tau`` (sim) plus noise."""
    rows = []
    for joint_id in joint_ids:
        for domain, slope in (("real", alpha), ("sim", beta)):
            drive = rng.uniform(*drive_range, size=n_per_joint)
            force = slope * drive + noise * rng.standard_normal(n_per_joint)
            rows.append(pd.DataFrame({"joint_id": joint_id, "drive_signal": drive, "contact_force": force, "domain": domain}))
    return pd.concat(rows, ignore_index=True)


def save_calibration(cal: CalibrationMap, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(cal.to_dict(), indent=2))


def load_calibration(path: Union[str, Path]) -> CalibrationMap:
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError as e:
        raise ConfigError("calibration", f"no such file: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError("calibration", f"invalid JSON in {path}: {e}") from e
    return CalibrationMap.from_dict(data)
