"""Hand model, serial-chain forward kinematics and the fingertip taxel layout."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from taxelsim.errors import ConfigError, ModelMismatchError
from taxelsim.rotations import Transform, axis_angle_matrix, is_rotation, matmul33, rotate

logger = logging.getLogger(__name__)

N_FINGERS = 5
N_DOF = 12
TAXELS_PER_FINGER = 120
FINGER_NAMES = ("thumb", "index", "middle", "ring", "little")
JOINT_ROLES = ("abduction", "rotation", "proximal", "distal")


@dataclass(frozen=True)
class Joint:
    name: str
    axis: np.ndarray
    origin: Transform
    lower: float
    upper: float
    role: str = "proximal"


@dataclass(frozen=True)
class FingerChain:
    name: str
    joints: tuple[Joint, ...]
    tip: Transform
    taxel_positions: np.ndarray  # (M, 3) in the fingertip frame
    taxel_normals: np.ndarray  # (M, 3) outward unit normals

    @property
    def n_taxels(self) -> int:
        return int(self.taxel_positions.shape[0])


@dataclass(frozen=True)
class HandModel:
    """Immutable kinematic description of the hand."""

    fingers: tuple[FingerChain, ...]
    name: str = "hand"

    @property
    def dof(self) -> int:
        return sum(len(f.joints) for f in self.fingers)

    @property
    def joints(self) -> list[Joint]:
        return [j for f in self.fingers for j in f.joints]

    @property
    def joint_names(self) -> list[str]:
        return [j.name for j in self.joints]

    @property
    def lower_limits(self) -> np.ndarray:
        return np.array([j.lower for j in self.joints], dtype=float)

    @property
    def upper_limits(self) -> np.ndarray:
        return np.array([j.upper for j in self.joints], dtype=float)

    @property
    def taxels_per_finger(self) -> int:
        return self.fingers[0].n_taxels

    @property
    def n_taxels(self) -> int:
        return sum(f.n_taxels for f in self.fingers)

    def finger_slices(self) -> list[slice]:
        """Index range of each finger's joints within the joint vector."""
        out, start = [], 0
        for finger in self.fingers:
            out.append(slice(start, start + len(finger.joints)))
            start += len(finger.joints)
        return out

    def _role_indices(self, role: str, fingers: Sequence[int]) -> np.ndarray:
        indices = []
        for i in fingers:
            sl = self.finger_slices()[i]
            roles = [j.role for j in self.fingers[i].joints]
            if role not in roles:
                raise ConfigError(f"fingers[{i}]", f"finger {self.fingers[i].name!r} has no {role} joint")
            indices.append(sl.start + roles.index(role))
        return np.array(indices, dtype=int)

    @property
    def root_joint_indices(self) -> np.ndarray:
        """Proximal flexion joint of every finger (per-finger torque source)."""
        return self._role_indices("proximal", range(len(self.fingers)))

    @property
    def inner_joint_indices(self) -> np.ndarray:
        """First flexion joint of the four non-thumb fingers."""
        return self._role_indices("proximal", range(1, len(self.fingers)))

    @property
    def outer_joint_indices(self) -> np.ndarray:
        """Distal joint of the four non-thumb fingers."""
        return self._role_indices("distal", range(1, len(self.fingers)))

    def taxel_local_positions(self) -> np.ndarray:
        return np.stack([f.taxel_positions for f in self.fingers])

    def taxel_local_normals(self) -> np.ndarray:
        return np.stack([f.taxel_normals for f in self.fingers])

    def validate(self, canonical: bool = True) -> None:
        """Check the structural invariants, raising ``ConfigError`` on the first failure.

        ``canonical`` additionally enforces the 5-finger, 12-DoF, 120-taxel layout.
        """
        if canonical:
            if len(self.fingers) != N_FINGERS:
                raise ConfigError("fingers", f"expected {N_FINGERS} fingers, got {len(self.fingers)}")
            if self.dof != N_DOF:
                raise ConfigError("fingers", f"expected {N_DOF} actuated joints, got {self.dof}")
        for i, finger in enumerate(self.fingers):
            if canonical and finger.n_taxels != TAXELS_PER_FINGER:
                raise ConfigError(f"fingers[{i}].taxels", f"expected {TAXELS_PER_FINGER} taxels, got {finger.n_taxels}")
            if finger.taxel_normals.shape != finger.taxel_positions.shape:
                raise ConfigError(f"fingers[{i}].taxels", "normals and positions differ in shape")
            if not np.allclose(np.linalg.norm(finger.taxel_normals, axis=-1), 1.0, atol=1e-9):
                raise ConfigError(f"fingers[{i}].taxels.normals", "taxel normals must be unit length")
            for j, joint in enumerate(finger.joints):
                path = f"fingers[{i}].joints[{j}]"
                if abs(np.linalg.norm(joint.axis) - 1.0) > 1e-9:
                    raise ConfigError(f"{path}.axis", "joint axis must be a unit vector")
                if not joint.lower < joint.upper:
                    raise ConfigError(f"{path}.limits", "lower limit must be below upper limit")
                if not is_rotation(joint.origin.rotation, 1e-9):
                    raise ConfigError(f"{path}.origin", "origin rotation is not in SO(3)")
                if joint.role not in JOINT_ROLES:
                    raise ConfigError(f"{path}.role", f"unknown role {joint.role!r}")


@dataclass(frozen=True)
class JointState:
    positions: np.ndarray
    velocities: np.ndarray = field(default=None)

    def __post_init__(self):
        q = np.asarray(self.positions, dtype=float)
        object.__setattr__(self, "positions", q)
        qd = np.zeros_like(q) if self.velocities is None else np.asarray(self.velocities, dtype=float)
        object.__setattr__(self, "velocities", qd)


@dataclass(frozen=True)
class TaxelFrameBatch:
    """World-frame taxel positions and normals for one joint configuration."""

    world_positions: np.ndarray  # (5, 120, 3)
    world_normals: np.ndarray  # (5, 120, 3)
    fingertip_poses: tuple[Transform, ...]

    @property
    def fingertip_positions(self) -> np.ndarray:
        return np.stack([p.translation for p in self.fingertip_poses])


@dataclass(frozen=True)
class FrameArrays:
    """Batched FK output used by the vectorized harness."""

    tip_rotations: np.ndarray  # (N, F, 3, 3)
    tip_translations: np.ndarray  # (N, F, 3)
    taxel_positions: np.ndarray  # (N, F, M, 3)
    taxel_normals: np.ndarray  # (N, F, M, 3)


def hemisphere_grid(radius: float, rings: int, sectors: int, axis=(1.0, 0.0, 0.0), max_polar: float = np.pi / 2):
    """Taxel layout on a capped hemispherical patch around ``axis``.

    Rings sit at the midpoints of ``rings`` equal polar bands in ``[0, max_polar]``;
    normals are radial.
    """
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    helper = np.array([0.0, 0.0, 1.0]) if abs(axis[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    u = np.cross(axis, helper)
    u /= np.linalg.norm(u)
    v = np.cross(axis, u)
    polar = (np.arange(rings) + 0.5) * max_polar / rings
    azimuth = 2.0 * np.pi * np.arange(sectors) / sectors
    theta, phi = np.meshgrid(polar, azimuth, indexing="ij")
    theta, phi = theta.ravel(), phi.ravel()
    normals = (
        np.cos(theta)[:, None] * axis
        + (np.sin(theta) * np.cos(phi))[:, None] * u
        + (np.sin(theta) * np.sin(phi))[:, None] * v
    )
    normals /= np.linalg.norm(normals, axis=-1, keepdims=True)
    return radius * normals, normals


def _taxel_layout(spec: dict, path: str):
    if "positions" in spec:
        positions = np.asarray(spec["positions"], dtype=float)
        normals = np.asarray(spec.get("normals"), dtype=float)
        if positions.ndim != 2 or positions.shape[1] != 3:
            raise ConfigError(f"{path}.positions", "expected a list of 3-vectors")
        return positions, normals
    pattern = spec.get("pattern", "hemisphere_grid")
    if pattern != "hemisphere_grid":
        raise ConfigError(f"{path}.pattern", f"unknown taxel pattern {pattern!r}")
    try:
        return hemisphere_grid(
            radius=float(spec["radius"]),
            rings=int(spec["rings"]),
            sectors=int(spec["sectors"]),
            axis=spec.get("axis", (1.0, 0.0, 0.0)),
            max_polar=float(spec.get("max_polar", np.pi / 2)),
        )
    except KeyError as e:
        raise ConfigError(f"{path}.{e.args[0]}", "missing field") from e


def _require(data: dict, key: str, path: str) -> Any:
    if not isinstance(data, dict) or key not in data:
        raise ConfigError(f"{path}.{key}" if path else key, "missing field")
    return data[key]


def hand_model_from_dict(data: dict, canonical: bool = True) -> HandModel:
    """Build and validate a ``HandModel`` from its JSON document."""
    default_layout = data.get("taxel_layout", {})
    fingers = []
    for i, fdata in enumerate(_require(data, "fingers", "")):
        path = f"fingers[{i}]"
        joints = []
        for j, jdata in enumerate(_require(fdata, "joints", path)):
            jpath = f"{path}.joints[{j}]"
            limits = _require(jdata, "limits", jpath)
            if len(limits) != 2:
                raise ConfigError(f"{jpath}.limits", "expected [lower, upper]")
            axis = np.asarray(_require(jdata, "axis", jpath), dtype=float)
            if axis.shape != (3,):
                raise ConfigError(f"{jpath}.axis", "expected a 3-vector")
            joints.append(
                Joint(
                    name=jdata.get("name", f"{fdata.get('name', i)}_{j}"),
                    axis=axis,
                    origin=Transform.from_dict(jdata.get("origin", {})),
                    lower=float(limits[0]),
                    upper=float(limits[1]),
                    role=jdata.get("role", "proximal"),
                )
            )
        positions, normals = _taxel_layout(fdata.get("taxels", default_layout), f"{path}.taxels")
        fingers.append(
            FingerChain(
                name=fdata.get("name", FINGER_NAMES[i] if i < len(FINGER_NAMES) else f"finger{i}"),
                joints=tuple(joints),
                tip=Transform.from_dict(fdata.get("tip", {})),
                taxel_positions=positions,
                taxel_normals=normals,
            )
        )
    model = HandModel(fingers=tuple(fingers), name=data.get("name", "hand"))
    model.validate(canonical=canonical)
    return model


def default_hand_model_path() -> Path:
    return Path(str(resources.files("taxelsim") / "data" / "hand_default.json"))


def load_hand_model(path: Optional[str | Path] = None, canonical: bool = True) -> HandModel:
    """Load a hand model JSON document; the packaged model when ``path`` is None."""
    path = Path(path) if path else default_hand_model_path()
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError as e:
        raise ConfigError("hand_model", f"no such file: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError("hand_model", f"invalid JSON in {path}: {e}") from e
    model = hand_model_from_dict(data, canonical=canonical)
    logger.info(f"[load_hand_model] Loaded {model.name!r}: {len(model.fingers)} fingers, {model.dof} DoF, {model.n_taxels} taxels")
    return model


def fk_arrays(model: HandModel, positions: np.ndarray) -> FrameArrays:
    """Forward kinematics for a batch of joint vectors ``positions`` (N, dof)."""
    q = np.asarray(positions, dtype=float)
    if q.ndim != 2 or q.shape[1] != model.dof:
        raise ModelMismatchError(f"expected joint positions of shape (N, {model.dof}), got {q.shape}")
    n = q.shape[0]
    tip_r, tip_t, tax_p, tax_n = [], [], [], []
    col = 0
    for finger in model.fingers:
        rot = np.broadcast_to(np.eye(3), (n, 3, 3))
        trans = np.zeros((n, 3))
        for joint in finger.joints:
            trans = rotate(rot, joint.origin.translation) + trans
            rot = matmul33(rot, joint.origin.rotation)
            rot = matmul33(rot, axis_angle_matrix(joint.axis, q[:, col]))
            col += 1
        trans = rotate(rot, finger.tip.translation) + trans
        rot = matmul33(rot, finger.tip.rotation)
        tip_r.append(rot)
        tip_t.append(trans)
        tax_p.append(rotate(rot[:, None], finger.taxel_positions) + trans[:, None])
        tax_n.append(rotate(rot[:, None], finger.taxel_normals))
    return FrameArrays(
        tip_rotations=np.stack(tip_r, axis=1),
        tip_translations=np.stack(tip_t, axis=1),
        taxel_positions=np.stack(tax_p, axis=1),
        taxel_normals=np.stack(tax_n, axis=1),
    )


def _frame_batch(arrays: FrameArrays, i: int) -> TaxelFrameBatch:
    poses = tuple(
        Transform(translation=arrays.tip_translations[i, f], rotation=arrays.tip_rotations[i, f])
        for f in range(arrays.tip_rotations.shape[1])
    )
    return TaxelFrameBatch(
        world_positions=arrays.taxel_positions[i],
        world_normals=arrays.taxel_normals[i],
        fingertip_poses=poses,
    )


def _positions(model: HandModel, state: JointState) -> np.ndarray:
    q = np.asarray(state.positions, dtype=float)
    if q.shape != (model.dof,):
        raise ModelMismatchError(f"joint state has shape {q.shape}, model has {model.dof} DoF")
    return q


def forward_kinematics(model: HandModel, state: JointState) -> TaxelFrameBatch:
    """Fingertip poses and world taxel frames for one joint state."""
    return _frame_batch(fk_arrays(model, _positions(model, state)[None]), 0)


def batch_forward_kinematics(model: HandModel, states: Sequence[JointState]) -> list[TaxelFrameBatch]:
    """``forward_kinematics`` over many states, evaluated as one vectorized pass."""
    if len(states) == 0:
        return []
    q = np.stack([_positions(model, s) for s in states])
    arrays = fk_arrays(model, q)
    return [_frame_batch(arrays, i) for i in range(len(states))]


def rest_poses(model: HandModel) -> tuple[Transform, ...]:
    return forward_kinematics(model, JointState(np.zeros(model.dof))).fingertip_poses
