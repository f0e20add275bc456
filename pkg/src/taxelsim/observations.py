"""Observation layouts and assembly for both tasks.

A layout is an ordered list of named slices, each flagged actor-visible or
critic-only. The actor vector packs the actor-visible slices in order; the
critic vector packs every slice in order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from taxelsim.calibration import normalize_torques
from taxelsim.rotations import encode6d_batch, matmul33, matrix_to_quaternion, transpose33
from taxelsim.state import BatchState, Observation

ORIENTATION_SIZES = {"6d": 6, "quaternion": 4, "none": 0}


@dataclass(frozen=True)
class Slot:
    name: str
    size: int
    actor: bool = True


@dataclass(frozen=True)
class ObservationLayout:
    slots: tuple

    def _offsets(self, critic: bool) -> dict:
        out, start = {}, 0
        for slot in self.slots:
            if critic or slot.actor:
                out[slot.name] = slice(start, start + slot.size)
                start += slot.size
        return out

    @property
    def actor_slices(self) -> dict:
        return self._offsets(critic=False)

    @property
    def critic_slices(self) -> dict:
        return self._offsets(critic=True)

    @property
    def actor_dim(self) -> int:
        return sum(s.size for s in self.slots if s.actor)

    @property
    def critic_dim(self) -> int:
        return sum(s.size for s in self.slots)

    def pack(self, values: dict) -> tuple[np.ndarray, np.ndarray]:
        """``values`` maps slot names to (N, size) arrays; returns (actor, critic)."""
        parts = []
        for slot in self.slots:
            value = np.asarray(values[slot.name], dtype=float)
            parts.append(value.reshape(value.shape[0], slot.size))
        critic = np.concatenate(parts, axis=1)
        actor = np.concatenate([p for p, s in zip(parts, self.slots) if s.actor], axis=1)
        return actor, critic

    def unpack(self, vector: np.ndarray, critic: bool = True) -> dict:
        vector = np.asarray(vector)
        offsets = self.critic_slices if critic else self.actor_slices
        return {name: vector[..., sl] for name, sl in offsets.items()}

    def describe(self) -> list[dict]:
        """The published descriptor: name, offsets and visibility per slice."""
        actor, critic = self.actor_slices, self.critic_slices
        return [
            {
                "name": s.name,
                "size": s.size,
                "critic_offset": critic[s.name].start,
                "actor_offset": actor[s.name].start if s.actor else None,
            }
            for s in self.slots
        ]


def grasp_layout(options) -> ObservationLayout:
    slots = [Slot("joint_angles", 12), Slot("joint_torque", 12), Slot("object_position", 3), Slot("object_velocity", 3)]
    if options.contact_force:
        slots.append(Slot("contact_force", 5))
    if options.contact_center != "none":
        slots.append(Slot("contact_center", 15))
    slots += [Slot("fingertip_positions", 15), Slot("force_command", 1)]
    return ObservationLayout(tuple(slots))


def rotate_layout(options) -> ObservationLayout:
    orientation = ORIENTATION_SIZES[options.orientation]
    slots = [Slot("joint_angles", 12)]
    if orientation:
        slots.append(Slot("target_orientation", orientation))
    slots.append(Slot("last_actions", 12))
    if options.contact_center != "none":
        slots.append(Slot("contact_center", 15))
    if options.contact_force:
        slots.append(Slot("contact_force", 5))
    slots.append(Slot("fingertip_positions", 15))
    if orientation:
        slots.append(Slot("object_orientation", orientation, actor=False))
    slots += [
        Slot("fingertip_velocities", 30, actor=False),
        Slot("fingertip_rotations", 30, actor=False),
        Slot("joint_velocities", 12, actor=False),
        Slot("object_linear_velocity", 3, actor=False),
        Slot("object_angular_velocity", 3, actor=False),
    ]
    return ObservationLayout(tuple(slots))


def observation_layout(task: str, options) -> ObservationLayout:
    return grasp_layout(options) if task == "grasp" else rotate_layout(options)


def _orientation(matrix: np.ndarray, mode: str) -> np.ndarray:
    if mode == "quaternion":
        return matrix_to_quaternion(matrix)
    return encode6d_batch(matrix)


def assemble_observation(state: BatchState, task: str, options, layout: ObservationLayout, tau_max: np.ndarray) -> Observation:
    """Pack a batch state into actor and critic vectors following ``layout``."""
    n = len(state)
    values = {
        "joint_angles": state.q,
        "joint_torque": normalize_torques(state.tau, tau_max),
        "object_position": state.observed_pos,
        "object_velocity": state.observed_vel,
        "contact_force": state.tactile_force,
        "contact_center": state.contact_center.reshape(n, 15),
        "fingertip_positions": state.tip_pos.reshape(n, 15),
        "force_command": state.f_cmd[:, None],
        "last_actions": state.last_action,
        "fingertip_velocities": state.tip_vel.reshape(n, 30),
        "fingertip_rotations": encode6d_batch(state.tip_rot).reshape(n, 30),
        "joint_velocities": state.qd,
        "object_linear_velocity": state.obj_vel,
        "object_angular_velocity": state.obj_omega,
    }
    if task == "rotate" and options.orientation != "none":
        relative = matmul33(state.goal_rot, transpose33(state.obj_rot))
        values["target_orientation"] = _orientation(relative, options.orientation)
        values["object_orientation"] = _orientation(state.obj_rot, options.orientation)
    actor, critic = layout.pack(values)
    return Observation(actor=actor, critic=critic, layout=layout)
