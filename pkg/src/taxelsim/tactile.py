"""Virtual taxel contact model.

A taxel is active when it has penetrated the object: the vector from the
nearest surface point to the taxel points against the outward normal. Each
active taxel reports a normal force from its penetration depth, and every
fingertip aggregates its taxels into a total force and a contact center.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from taxelsim.errors import ConfigError, ContractViolationError
from taxelsim.geometry import ObjectShape, SurfaceQuery
from taxelsim.kinematics import TaxelFrameBatch
from taxelsim.rotations import Transform, dot, rotate, transpose33

CENTER_MODES = ("force_weighted", "unweighted")
# Relative slack on the squared bounding radius used to cull far taxels.
CULL_SLACK = 1e-9


@dataclass(frozen=True)
class ContactMaterial:
    """Fingertip pad material.

    Without a table the force law is linear, ``f = k * d``. With a
    stress-strain table, force is the interpolated stress at strain
    ``d / pad_thickness`` times the taxel area; the table continues along its
    last segment beyond the final strain.
    """

    stiffness: float = 1000.0
    stress_strain_table: Optional[tuple] = None
    pad_thickness: float = 0.002
    taxel_area: float = 1.0e-5
    min_depth: float = 0.0

    def __post_init__(self):
        if not self.stiffness > 0:
            raise ConfigError("material.stiffness", "must be positive")
        if not self.pad_thickness > 0:
            raise ConfigError("material.pad_thickness", "must be positive")
        if not self.taxel_area > 0:
            raise ConfigError("material.taxel_area", "must be positive")
        if self.min_depth < 0:
            raise ConfigError("material.min_depth", "must be non-negative")
        if self.stress_strain_table is not None:
            table = np.asarray(self.stress_strain_table, dtype=float)
            if table.ndim != 2 or table.shape[1] != 2 or len(table) < 1:
                raise ConfigError("material.stress_strain_table", "expected a list of [strain, stress] pairs")
            if np.any(table[:, 0] <= 0) or np.any(table[:, 1] <= 0):
                raise ConfigError("material.stress_strain_table", "strain and stress must be positive")
            if np.any(np.diff(table[:, 0]) <= 0) or np.any(np.diff(table[:, 1]) <= 0):
                raise ConfigError("material.stress_strain_table", "must be strictly increasing in both columns")
            object.__setattr__(self, "stress_strain_table", tuple(map(tuple, table.tolist())))

    @property
    def is_linear(self) -> bool:
        return self.stress_strain_table is None

    @classmethod
    def from_dict(cls, data: dict) -> ContactMaterial:
        table = data.get("stress_strain_table")
        return cls(
            stiffness=float(data.get("stiffness", 1000.0)),
            stress_strain_table=tuple(map(tuple, table)) if table else None,
            pad_thickness=float(data.get("pad_thickness", 0.002)),
            taxel_area=float(data.get("taxel_area", 1.0e-5)),
            min_depth=float(data.get("min_depth", 0.0)),
        )

    def to_dict(self) -> dict:
        return {
            "stiffness": self.stiffness,
            "stress_strain_table": [list(p) for p in self.stress_strain_table] if self.stress_strain_table else None,
            "pad_thickness": self.pad_thickness,
            "taxel_area": self.taxel_area,
            "min_depth": self.min_depth,
        }


@dataclass(frozen=True)
class TaxelReading:
    active: bool
    depth: float
    force: float
    world_position: np.ndarray


@dataclass(frozen=True)
class FingertipTactile:
    """Aggregated reading of one fingertip: ``T_i = (F_i, mu_i)`` plus per-taxel arrays."""

    total_force: float
    contact_center: np.ndarray
    active_count: int
    active: np.ndarray = field(repr=False)
    depths: np.ndarray = field(repr=False)
    forces: np.ndarray = field(repr=False)
    positions: np.ndarray = field(repr=False)

    @property
    def readings(self) -> list[TaxelReading]:
        return [
            TaxelReading(bool(a), float(d), float(f), p)
            for a, d, f, p in zip(self.active, self.depths, self.forces, self.positions)
        ]


def detect_contact(taxel_pos: np.ndarray, surface: SurfaceQuery) -> bool:
    """True iff ``(p_ij - p_o) . n_o < 0``; a taxel exactly on the surface is not in contact."""
    v = np.asarray(taxel_pos, dtype=float) - surface.nearest_point
    return bool(dot(v, surface.outward_normal) < 0.0)


def _table_force(depth: np.ndarray, material: ContactMaterial) -> np.ndarray:
    table = np.asarray(material.stress_strain_table)
    strain = np.concatenate([[0.0], table[:, 0]])
    stress = np.concatenate([[0.0], table[:, 1]])
    x = depth / material.pad_thickness
    inside = np.interp(x, strain, stress)
    slope = (stress[-1] - stress[-2]) / (strain[-1] - strain[-2])
    beyond = stress[-1] + slope * (x - strain[-1])
    return np.where(x > strain[-1], beyond, inside) * material.taxel_area


def force_from_depth(depth: np.ndarray, material: ContactMaterial) -> np.ndarray:
    """Vectorized ``taxel_force`` without the sign check."""
    depth = np.asarray(depth, dtype=float)
    if material.is_linear:
        return material.stiffness * depth
    return _table_force(depth, material)


def taxel_force(depth: float, material: ContactMaterial) -> float:
    """Normal force of one taxel at penetration ``depth``.

    Raises:
        ContractViolationError: if ``depth`` is negative.
    """
    if depth < 0:
        raise ContractViolationError(f"taxel depth must be non-negative, got {depth}")
    return float(force_from_depth(depth, material))


@dataclass(frozen=True)
class TactileArrays:
    """Batched sensing output over (N envs, F fingers, M taxels)."""

    active: np.ndarray
    depth: np.ndarray
    force: np.ndarray
    nearest: np.ndarray
    normals: np.ndarray
    total_force: np.ndarray  # (N, F)
    contact_center: np.ndarray  # (N, F, 3)
    active_count: np.ndarray  # (N, F)


def _weighted_mean(total: np.ndarray, weighted: np.ndarray, sentinel: np.ndarray) -> np.ndarray:
    safe = np.where(total > 0.0, total, 1.0)
    return np.where((total > 0.0)[..., None], weighted / safe[..., None], sentinel)


def contact_center(
    weights: np.ndarray, positions: np.ndarray, sentinel: np.ndarray
) -> np.ndarray:
    """Weighted mean of ``positions`` over the taxel axis; ``sentinel`` where all weights are zero."""
    total = np.sum(weights, axis=-1)
    weighted = np.sum(weights[..., None] * positions, axis=-2)
    return _weighted_mean(total, weighted, sentinel)


def sense_arrays(
    taxel_positions: np.ndarray,
    origins: np.ndarray,
    shape: ObjectShape,
    rotations: np.ndarray,
    translations: np.ndarray,
    material: ContactMaterial,
    scales: Optional[np.ndarray] = None,
    center_mode: str = "force_weighted",
) -> TactileArrays:
    """Sense every fingertip of every environment in one pass.

    ``taxel_positions`` is (N, F, M, 3), ``origins`` the (N, F, 3) fingertip
    origins used as the no-contact center. The object of env ``n`` has pose
    (``rotations[n]``, ``translations[n]``) and is ``shape`` scaled by
    ``scales[n]``; queries go to the unscaled shape and are scaled back.

    Only taxels inside the object's bounding sphere can penetrate it, so the
    surface query runs on those alone. Every other taxel is inactive, its
    ``nearest`` is the object origin and its ``normals`` entry is zero.
    """
    if center_mode not in CENTER_MODES:
        raise ConfigError("observation.contact_center", f"unknown center mode {center_mode!r}")
    p = np.asarray(taxel_positions, dtype=float)
    n_env, n_fingers, n_taxels = p.shape[:3]
    n_cells = n_env * n_fingers
    rot = np.asarray(rotations, dtype=float).reshape(n_env, 3, 3)
    trans = np.asarray(translations, dtype=float).reshape(n_env, 3)
    s = np.ones(n_env) if scales is None else np.asarray(scales, dtype=float).reshape(n_env)

    offset = (p - trans[:, None, None]).reshape(-1, 3)
    reach = (shape.bounding_radius * s) ** 2 * (1.0 + CULL_SLACK)
    candidates = np.flatnonzero(dot(offset, offset).reshape(n_env, -1) <= reach[:, None])
    env = candidates // (n_fingers * n_taxels)
    cell = candidates // n_taxels

    pk = p.reshape(-1, 3)[candidates]
    rk, tk, sk = rot[env], trans[env], s[env, None]
    near_local, normal_local, _ = shape.nearest_local(rotate(transpose33(rk), offset[candidates]) / sk)
    near_k = rotate(rk, near_local * sk) + tk
    normal_k = rotate(rk, normal_local)

    penetration = -dot(pk - near_k, normal_k)
    active_k = penetration > material.min_depth
    depth_k = np.where(active_k, penetration, 0.0)
    force_k = np.where(active_k, force_from_depth(depth_k, material), 0.0)

    def scatter(values: np.ndarray, fill: np.ndarray) -> np.ndarray:
        fill[candidates] = values
        return fill.reshape(p.shape[: 3 + values.ndim - 1])

    active = scatter(active_k, np.zeros(len(offset), dtype=bool))
    depth = scatter(depth_k, np.zeros(len(offset)))
    force = scatter(force_k, np.zeros(len(offset)))
    nearest = scatter(near_k, np.repeat(trans, n_fingers * n_taxels, axis=0))
    normals = scatter(normal_k, np.zeros_like(offset))

    total = np.bincount(cell, weights=force_k, minlength=n_cells).reshape(n_env, n_fingers)
    count = np.bincount(cell[active_k], minlength=n_cells).reshape(n_env, n_fingers)
    if center_mode == "unweighted":
        weights = active_k.astype(float)
    elif material.is_linear:
        # k cancels from the force-weighted mean, so weight by depth directly.
        weights = depth_k
    else:
        weights = force_k
    weighted = np.stack([np.bincount(cell, weights=weights * pk[:, c], minlength=n_cells) for c in range(3)], axis=-1)
    sentinel = np.broadcast_to(np.asarray(origins, dtype=float), (n_env, n_fingers, 3)).reshape(n_cells, 3)
    center = _weighted_mean(np.bincount(cell, weights=weights, minlength=n_cells), weighted, sentinel)
    return TactileArrays(active, depth, force, nearest, normals, total, center.reshape(n_env, n_fingers, 3), count)


def _fingertip(arrays: TactileArrays, n: int, f: int, positions: np.ndarray) -> FingertipTactile:
    return FingertipTactile(
        total_force=float(arrays.total_force[n, f]),
        contact_center=arrays.contact_center[n, f],
        active_count=int(arrays.active_count[n, f]),
        active=arrays.active[n, f],
        depths=arrays.depth[n, f],
        forces=arrays.force[n, f],
        positions=positions,
    )


def sense_fingertip(
    taxels: np.ndarray,
    shape: ObjectShape,
    pose: Transform,
    material: ContactMaterial,
    origin: np.ndarray,
    center_mode: str = "force_weighted",
) -> FingertipTactile:
    """Tactile reading of one fingertip.

    ``origin`` is the fingertip frame origin in world coordinates, reported
    as the contact center when nothing is touched.
    """
    p = np.asarray(taxels, dtype=float)
    arrays = sense_arrays(
        p[None, None],
        np.asarray(origin, dtype=float)[None, None],
        shape,
        pose.rotation[None],
        pose.translation[None],
        material,
        center_mode=center_mode,
    )
    return _fingertip(arrays, 0, 0, p)


def sense_hand(
    frames: TaxelFrameBatch,
    shape: ObjectShape,
    pose: Transform,
    material: ContactMaterial,
    center_mode: str = "force_weighted",
) -> list[FingertipTactile]:
    """Per-finger readings for one hand configuration."""
    p = np.asarray(frames.world_positions, dtype=float)
    arrays = sense_arrays(
        p[None],
        frames.fingertip_positions[None],
        shape,
        pose.rotation[None],
        pose.translation[None],
        material,
        center_mode=center_mode,
    )
    return [_fingertip(arrays, 0, f, p[f]) for f in range(p.shape[0])]


def contact_forces(readings: Sequence[FingertipTactile]) -> np.ndarray:
    """The 5-D contact-force observation ``(F_1, ..., F_5)``."""
    return np.array([r.total_force for r in readings], dtype=float)

