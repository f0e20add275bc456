"""Reward and penalty terms for force-adaptive grasping and in-hand rotation.

Weights are signed: penalty weights default to negative values and a
composite reward is the plain sum of its weighted terms. Every function
broadcasts over leading batch dimensions; the finger/joint axis is last.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import expit

from taxelsim.errors import ConfigError
from taxelsim.utils import dataclass_from_dict

THUMB = 0
GRASP_TERMS = ("torque", "force", "diff", "outter", "action", "vel", "terminal")
ROTATION_TERMS = ("close", "action", "bonus")


@dataclass(frozen=True, kw_only=True)
class GraspRewardConfig:
    w_torque: float = 1.0
    w_force: float = 1.0
    w_diff: float = -0.5
    w_outter: float = -0.1
    w_action: float = -0.01
    w_vel: float = -0.0005
    w_terminal: float = -50.0
    sigma: float = 0.10
    tau_max: float = 1.0
    f_max: float = 100.0
    torque_range: tuple = (0.01, 1.1)
    force_range: tuple = (0.01, 200.0)
    outer_center: tuple = (0.8, 0.8, 0.8, 0.8)
    use_torque_reward: bool = True
    use_force_reward: bool = True

    def __post_init__(self):
        if not self.sigma > 0:
            raise ConfigError("rewards.sigma", "must be positive")
        for name in ("torque_range", "force_range"):
            low, high = getattr(self, name)
            if low > high:
                raise ConfigError(f"rewards.{name}", f"low {low} > high {high}")
        if len(self.outer_center) != 4:
            raise ConfigError("rewards.outer_center", "expected 4 values")

    @classmethod
    def from_dict(cls, data: dict) -> GraspRewardConfig:
        return dataclass_from_dict(cls, data, "rewards")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, kw_only=True)
class RotationRewardConfig:
    close_weight: float = 1.0
    action_weight: float = -0.0002
    goal_bonus: float = 250.0
    rot_threshold: float = 0.3
    pos_threshold: float = 0.05
    sigmoid_gain: float = 400.0
    sigmoid_center: float = 0.05
    eps_rot: float = 0.1

    def __post_init__(self):
        for name in ("rot_threshold", "pos_threshold", "eps_rot"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"rewards.{name}", "must be positive")

    @classmethod
    def from_dict(cls, data: dict) -> RotationRewardConfig:
        return dataclass_from_dict(cls, data, "rewards")

    def to_dict(self) -> dict:
        return asdict(self)


def _gated_sum(values, target, contact, value_range, sigma):
    values = np.asarray(values, dtype=float)
    low, high = value_range
    valid = (values >= low) & (values <= high)
    gauss = np.exp(-((values - np.asarray(target, dtype=float)[..., None]) ** 2) / (2.0 * sigma**2))
    per_finger = np.where(valid, gauss, 0.0)
    per_finger[..., THUMB] = valid[..., THUMB]
    return np.sum(np.where(contact, per_finger, 0.0), axis=-1)


def torque_reward(tau, contact, f_cmd, cfg: GraspRewardConfig):
    """Thumb: binary in-range bonus. Other fingers: Gaussian around ``tau_max * F_cmd``.

    Every finger counts only while in contact.
    """
    target = cfg.tau_max * np.asarray(f_cmd, dtype=float)
    return cfg.w_torque * _gated_sum(tau, target, np.asarray(contact, bool), cfg.torque_range, cfg.sigma)


def force_reward(forces, contact, f_cmd, cfg: GraspRewardConfig):
    """Mirror of ``torque_reward`` with target ``F_cmd * f_max`` and the force range."""
    target = np.asarray(f_cmd, dtype=float) * cfg.f_max
    return cfg.w_force * _gated_sum(forces, target, np.asarray(contact, bool), cfg.force_range, cfg.sigma)


def consistency_penalty(q_inner, cfg: GraspRewardConfig):
    """``w_diff`` times the population variance of the four inner joint positions."""
    return cfg.w_diff * np.var(np.asarray(q_inner, dtype=float), axis=-1)


def outer_penalty(q_outer, cfg: GraspRewardConfig):
    offset = np.asarray(q_outer, dtype=float) - np.asarray(cfg.outer_center)
    return cfg.w_outter * np.sqrt(np.sum(offset**2, axis=-1))


def action_rate_penalty(action, prev_action, weight: float):
    delta = np.asarray(action, dtype=float) - np.asarray(prev_action, dtype=float)
    return weight * np.sum(delta**2, axis=-1)


def velocity_penalty(qd, w_vel: float):
    return w_vel * np.sum(np.asarray(qd, dtype=float) ** 2, axis=-1)


def rotation_reward(d_rot, d_goal, cfg: RotationRewardConfig):
    """``close_weight / (|d_rot| + eps) * sigmoid gate on d_goal``."""
    gate = expit(-cfg.sigmoid_gain * (np.asarray(d_goal, dtype=float) - cfg.sigmoid_center))
    return cfg.close_weight / (np.abs(d_rot) + cfg.eps_rot) * gate


def goal_bonus(d_rot, d_pos, cfg: RotationRewardConfig):
    reached = (np.asarray(d_rot) < cfg.rot_threshold) & (np.asarray(d_pos) < cfg.pos_threshold)
    return np.where(reached, cfg.goal_bonus, 0.0)


def grasp_reward_terms(
    *,
    tau,
    forces,
    contact,
    f_cmd,
    q_inner,
    q_outer,
    action,
    prev_action,
    qd,
    terminal,
    cfg: GraspRewardConfig,
) -> dict:
    """Weighted grasp terms keyed by ``GRASP_TERMS`` plus their sum under ``total``."""
    zero = np.zeros(np.shape(f_cmd))
    terms = {
        "torque": torque_reward(tau, contact, f_cmd, cfg) if cfg.use_torque_reward else zero,
        "force": force_reward(forces, contact, f_cmd, cfg) if cfg.use_force_reward else zero,
        "diff": consistency_penalty(q_inner, cfg),
        "outter": outer_penalty(q_outer, cfg),
        "action": action_rate_penalty(action, prev_action, cfg.w_action),
        "vel": velocity_penalty(qd, cfg.w_vel),
        "terminal": np.where(terminal, cfg.w_terminal, 0.0),
    }
    terms["total"] = sum(terms[name] for name in GRASP_TERMS)
    return terms


def rotation_reward_terms(*, d_rot, d_goal, d_pos, action, prev_action, cfg: RotationRewardConfig) -> dict:
    """Weighted rotation terms keyed by ``ROTATION_TERMS`` plus ``total``."""
    terms = {
        "close": rotation_reward(d_rot, d_goal, cfg),
        "action": action_rate_penalty(action, prev_action, cfg.action_weight),
        "bonus": goal_bonus(d_rot, d_pos, cfg),
    }
    terms["total"] = sum(terms[name] for name in ROTATION_TERMS)
    return terms
