"""Minimal deterministic rigid-object and joint integrators.

Semi-implicit Euler throughout: velocities update first, positions use the
new velocities. Contacts are penalty forces from the taxel model; the object
never pushes back on the joints.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from taxelsim.rotations import cross, dot, exp_map, matmul33, norm3, orthonormalize, rotate, transpose33
from taxelsim.tactile import TactileArrays


@dataclass(frozen=True)
class ContactParams:
    """Per-environment contact coefficients, each (N,)."""

    friction: np.ndarray
    restitution: np.ndarray
    damping: np.ndarray
    force_to_newton: float
    friction_regularization: float


def step_joints(q, qd, tau, inertia: float, viscous: float, lower, upper, h: float):
    """``qdd = (tau - b qd) / J``; joints stop dead at their limits."""
    qdd = (tau - viscous * qd) / inertia
    qd = qd + h * qdd
    q = q + h * qd
    hit = (q < lower) | (q > upper)
    return np.clip(q, lower, upper), np.where(hit, 0.0, qd)


def contact_wrench(
    sense: TactileArrays,
    taxel_velocities: np.ndarray,
    obj_pos: np.ndarray,
    obj_vel: np.ndarray,
    obj_omega: np.ndarray,
    params: ContactParams,
):
    """Net force and torque (about the object origin) from every active taxel.

    Each active taxel pushes the object along ``-n_o`` at ``p_o``. The spring
    part is scaled by the restitution coefficient while the contact opens,
    damping acts only while it closes, and friction opposes tangential
    sliding up to the Coulomb limit.
    """
    n = obj_pos.shape[0]
    expand = (slice(None), None, None)
    r = sense.nearest - obj_pos[:, None, None]
    v_point = obj_vel[:, None, None] + cross(obj_omega[:, None, None], r)
    v_rel = v_point - taxel_velocities
    approach = dot(v_rel, sense.normals)
    closing = approach > 0.0
    spring = params.force_to_newton * sense.force * np.where(closing, 1.0, params.restitution[expand])
    normal = np.where(sense.active, spring + params.damping[expand] * np.maximum(approach, 0.0), 0.0)

    v_t = v_rel - approach[..., None] * sense.normals
    speed = norm3(v_t)
    friction = np.minimum(params.friction[expand] * normal, params.friction_regularization * speed)
    direction = v_t / np.where(speed > 0.0, speed, 1.0)[..., None]
    f = -normal[..., None] * sense.normals - friction[..., None] * direction

    force = np.sum(f.reshape(n, -1, 3), axis=1)
    torque = np.sum(cross(r, f).reshape(n, -1, 3), axis=1)
    return force, torque


def step_object(pos, rot, vel, omega, force, torque, mass, inertia_body, inertia_body_inv, gravity, h: float):
    """Advance the free object by one substep under ``force``/``torque`` and gravity."""
    acc = force / mass[:, None] + gravity
    vel = vel + h * acc
    pos = pos + h * vel
    rt = transpose33(rot)
    inertia_world = matmul33(matmul33(rot, inertia_body), rt)
    inertia_world_inv = matmul33(matmul33(rot, inertia_body_inv), rt)
    gyro = cross(omega, rotate(inertia_world, omega))
    omega = omega + h * rotate(inertia_world_inv, torque - gyro)
    rot = orthonormalize(matmul33(exp_map(omega * h), rot))
    return pos, rot, vel, omega


def kinetic_energy(vel, omega, rot, mass, inertia_body):
    """Translational plus rotational kinetic energy per environment."""
    body_omega = rotate(transpose33(rot), omega)
    return 0.5 * mass * dot(vel, vel) + 0.5 * dot(body_omega, rotate(inertia_body, body_omega))
