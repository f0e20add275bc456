"""Vectorized episode execution for the grasp and rotate tasks."""

from __future__ import annotations

import logging
from dataclasses import replace
from typing import Optional, Sequence

import numpy as np

from taxelsim.actuator import PARAM_NAMES, ActuatorParams, step_actuator
from taxelsim.calibration import CalibrationMap
from taxelsim.configuration import EpisodeConfig
from taxelsim.dynamics import ContactParams, contact_wrench, step_joints, step_object
from taxelsim.errors import ConfigError, ContractViolationError, PoisonedStateError
from taxelsim.kinematics import HandModel, fk_arrays
from taxelsim.observations import assemble_observation, observation_layout
from taxelsim.randomization import EpisodeDraw, draw_episode, make_stream
from taxelsim.rewards import GRASP_TERMS, ROTATION_TERMS, grasp_reward_terms, rotation_reward_terms
from taxelsim.rotations import matmul33, norm3, quarter_turn, rot_distance_batch, rotation_vector, transpose33
from taxelsim.state import BatchState, EnvState, Observation, StepResult
from taxelsim.tactile import TactileArrays, sense_arrays

logger = logging.getLogger(__name__)


class VecEnv:
    """N independent environments stepped together.

    Environment ``k`` of this batch is global environment ``env_indices[k]``
    and draws only from that index's random stream, so results do not depend
    on how a run is split into batches.
    """

    def __init__(
        self,
        config: EpisodeConfig,
        model: HandModel,
        seed: int,
        env_indices: Sequence[int],
        calibration: Optional[CalibrationMap] = None,
    ):
        if len(env_indices) < 1:
            raise ConfigError("envs", "need at least one environment")
        self.config = config
        self.model = model
        self.seed = int(seed)
        self.env_indices = [int(i) for i in env_indices]
        self.n = len(self.env_indices)
        calibration = calibration if calibration is not None else config.calibration_map()
        self.tau_max = calibration.torque_limits(model.dof)
        self.layout = observation_layout(config.task, config.observation)
        self.term_names = GRASP_TERMS if config.task == "grasp" else ROTATION_TERMS
        self.lower = model.lower_limits
        self.upper = model.upper_limits
        self.finger_joints = model.root_joint_indices
        self.inner_joints = model.inner_joint_indices
        self.outer_joints = model.outer_joint_indices
        axis = np.asarray(config.rotation_axis, dtype=float)
        self.quarter = quarter_turn(axis / np.linalg.norm(axis))
        self.gravity = np.array([0.0, 0.0, -config.gravity])
        self.center_mode = "force_weighted" if config.observation.contact_center == "none" else config.observation.contact_center
        self.state: Optional[BatchState] = None
        self.draws: list[EpisodeDraw] = []

    # -- sensing -----------------------------------------------------------------

    def _sense(self, taxels, tip_pos, pos, rot) -> TactileArrays:
        return sense_arrays(
            taxels, tip_pos, self.config.object.shape, rot, pos, self.config.material, self.scale, self.center_mode
        )

    def _observe_position(self, pos: np.ndarray) -> np.ndarray:
        sigma = self.config.observation.position_noise
        if sigma == 0.0:
            return pos.copy()
        return pos + np.stack([stream.normal(0.0, sigma, 3) for stream in self.streams])

    def _check_finite(self, step: int, **arrays) -> None:
        for name, value in arrays.items():
            bad = ~np.all(np.isfinite(value.reshape(self.n, -1)), axis=1)
            if np.any(bad):
                k = int(np.flatnonzero(bad)[0])
                message = f"[step {step}] env {self.env_indices[k]}: non-finite {name}"
                logger.error(f"[poisoned] {message}")
                raise PoisonedStateError(message)

    # -- episode -----------------------------------------------------------------

    def reset(self) -> Observation:
        """Draw every environment's episode and place hand and object."""
        cfg = self.config
        self.streams = [make_stream(self.seed, i) for i in self.env_indices]
        self.draws = [
            draw_episode(cfg.randomization, s, self.seed, i, self.model.dof) for s, i in zip(self.streams, self.env_indices)
        ]
        d = self.draws
        self.mass = np.array([x.object_mass for x in d])
        self.scale = np.array([x.object_scale for x in d])
        self.contact = ContactParams(
            friction=np.array([x.friction for x in d]),
            restitution=np.array([x.restitution for x in d]),
            damping=np.array([x.damping for x in d]),
            force_to_newton=cfg.force_to_newton,
            friction_regularization=cfg.friction_regularization,
        )
        self.actuator = ActuatorParams(**{name: np.stack([getattr(x.actuator, name) for x in d]) for name in PARAM_NAMES})
        base_mass, base_inertia = cfg.object.shape.mass_properties(cfg.object.density)
        # Inertia scales with mass and the square of the size.
        self.inertia = base_inertia / base_mass * (self.mass * self.scale**2)[:, None, None]
        self.inertia_inv = np.linalg.inv(self.inertia)

        q = np.clip(np.zeros((self.n, self.model.dof)), self.lower, self.upper)
        frames = fk_arrays(self.model, q)
        rot = np.stack([x.orientation for x in d])
        pos = np.tile(np.asarray(cfg.object.initial_position, dtype=float), (self.n, 1))
        if cfg.task == "grasp":
            pos[:, 2] = [x.drop_height for x in d]
        sense = self._sense(frames.taxel_positions, frames.tip_translations, pos, rot)
        observed = self._observe_position(pos)
        zeros3 = np.zeros((self.n, 3))
        self.state = BatchState(
            q=q,
            qd=np.zeros_like(q),
            tau=np.zeros_like(q),
            last_action=np.zeros_like(q),
            obj_pos=pos,
            obj_rot=rot,
            obj_vel=zeros3,
            obj_omega=zeros3,
            tip_pos=frames.tip_translations,
            tip_rot=frames.tip_rotations,
            tip_vel=np.zeros((self.n, len(self.model.fingers), 6)),
            tactile_force=sense.total_force,
            contact_center=sense.contact_center,
            active_count=sense.active_count,
            observed_pos=observed,
            observed_vel=zeros3,
            f_cmd=np.array([x.f_cmd for x in d]),
            goal_rot=matmul33(self.quarter, rot),
            start_pos=pos.copy(),
            successes=np.zeros(self.n, dtype=int),
            hold_steps=np.zeros(self.n, dtype=int),
            done=np.zeros(self.n, dtype=bool),
            step_index=0,
        )
        self._taxels = frames.taxel_positions
        logger.info(f"[reset_envs] {self.n} {cfg.task} envs from seed {self.seed} (streams {self.env_indices[0]}..{self.env_indices[-1]})")
        return self.observe()

    def observe(self) -> Observation:
        return assemble_observation(self.state, self.config.task, self.config.observation, self.layout, self.tau_max)

    def env_state(self, k: int) -> EnvState:
        return self.state.env(k, self.draws[k], self.config.task)

    def step(self, action: np.ndarray) -> StepResult:
        """Advance every live environment by one control period.

        Raises:
            ContractViolationError: for a wrongly shaped or non-finite action.
            PoisonedStateError: when any state value turns non-finite.
        """
        if self.state is None:
            raise ContractViolationError("step() called before reset()")
        cfg, s = self.config, self.state
        a = np.asarray(action, dtype=float)
        if a.shape != (self.n, self.model.dof):
            raise ContractViolationError(f"action must have shape ({self.n}, {self.model.dof}), got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ContractViolationError("action contains non-finite values")
        live = ~s.done
        step = s.step_index + 1
        h = cfg.dt / cfg.substeps
        target = np.clip(a, self.lower, self.upper)

        q, qd, tau = s.q, s.qd, s.tau
        pos, rot, vel, omega = s.obj_pos, s.obj_rot, s.obj_vel, s.obj_omega
        taxels = self._taxels
        tip_t0, tip_r0 = s.tip_pos, s.tip_rot
        for _ in range(cfg.substeps):
            tau = step_actuator(self.actuator, target, q, 0.0, qd)
            q, qd = step_joints(q, qd, tau, cfg.joint_inertia, cfg.joint_damping, self.lower, self.upper, h)
            frames = fk_arrays(self.model, q)
            taxel_vel = (frames.taxel_positions - taxels) / h
            taxels = frames.taxel_positions
            sense = self._sense(taxels, frames.tip_translations, pos, rot)
            force, torque = contact_wrench(sense, taxel_vel, pos, vel, omega, self.contact)
            pos, rot, vel, omega = step_object(
                pos, rot, vel, omega, force, torque, self.mass, self.inertia, self.inertia_inv, self.gravity, h
            )
            self._check_finite(step, joint_positions=q, joint_velocities=qd, object_position=pos, object_velocity=vel, object_angular_velocity=omega)

        sense = self._sense(taxels, frames.tip_translations, pos, rot)
        tip_lin = (frames.tip_translations - tip_t0) / cfg.dt
        tip_ang = rotation_vector(matmul33(frames.tip_rotations, transpose33(tip_r0))) / cfg.dt
        observed = self._observe_position(pos)
        if cfg.observation.finite_difference_velocity:
            observed_vel = (observed - s.observed_pos) / cfg.dt
        else:
            observed_vel = vel

        contact = sense.active_count > 0
        fell = pos[:, 2] < cfg.floor_height
        truncated = np.full(self.n, step >= cfg.max_steps)
        goal = s.goal_rot
        successes = s.successes
        hold = s.hold_steps
        if cfg.task == "grasp":
            terms = grasp_reward_terms(
                tau=tau[:, self.finger_joints],
                forces=sense.total_force,
                contact=contact,
                f_cmd=s.f_cmd,
                q_inner=q[:, self.inner_joints],
                q_outer=q[:, self.outer_joints],
                action=a,
                prev_action=s.last_action,
                qd=qd,
                terminal=fell,
                cfg=cfg.rewards,
            )
            steady = (norm3(vel) < cfg.hold.max_speed) & (np.sum(contact, axis=1) >= cfg.hold.min_fingers)
            hold = np.where(steady, hold + 1, 0)
            success = hold == cfg.hold.steps
        else:
            d_rot = rot_distance_batch(rot, goal)
            d_pos = norm3(pos - s.start_pos)
            terms = rotation_reward_terms(d_rot=d_rot, d_goal=d_pos, d_pos=d_pos, action=a, prev_action=s.last_action, cfg=cfg.rewards)
            success = (d_rot < cfg.rewards.rot_threshold) & (d_pos < cfg.rewards.pos_threshold)
            goal = np.where(success[:, None, None], matmul33(self.quarter, goal), goal)
        success = success & live
        successes = successes + success

        def keep(new, old):
            mask = live.reshape((self.n,) + (1,) * (np.ndim(new) - 1))
            return np.where(mask, new, old)

        terminated = fell & live
        new_state = BatchState(
            q=keep(q, s.q),
            qd=keep(qd, s.qd),
            tau=keep(tau, s.tau),
            last_action=keep(a, s.last_action),
            obj_pos=keep(pos, s.obj_pos),
            obj_rot=keep(rot, s.obj_rot),
            obj_vel=keep(vel, s.obj_vel),
            obj_omega=keep(omega, s.obj_omega),
            tip_pos=keep(frames.tip_translations, s.tip_pos),
            tip_rot=keep(frames.tip_rotations, s.tip_rot),
            tip_vel=keep(np.concatenate([tip_lin, tip_ang], axis=-1), s.tip_vel),
            tactile_force=keep(sense.total_force, s.tactile_force),
            contact_center=keep(sense.contact_center, s.contact_center),
            active_count=keep(sense.active_count, s.active_count),
            observed_pos=keep(observed, s.observed_pos),
            observed_vel=keep(observed_vel, s.observed_vel),
            f_cmd=s.f_cmd,
            goal_rot=keep(goal, s.goal_rot),
            start_pos=s.start_pos,
            successes=keep(successes, s.successes),
            hold_steps=keep(hold, s.hold_steps),
            done=s.done | terminated | (truncated & live),
            step_index=step,
        )
        self._taxels = np.where(live[:, None, None, None], taxels, self._taxels)
        self.state = new_state
        terms = {k: np.where(live, v, 0.0) for k, v in terms.items()}
        if np.any(success):
            logger.debug(f"[step_envs] step {step}: success in envs {[self.env_indices[k] for k in np.flatnonzero(success)]}")
        return StepResult(
            observation=self.observe(),
            reward=terms["total"],
            terms=terms,
            terminated=terminated,
            truncated=truncated & live & ~terminated,
            success_event=success,
            state=new_state,
            active=live,
        )

    @property
    def all_done(self) -> bool:
        return self.state is not None and bool(np.all(self.state.done))


def with_contacts_disabled(config: EpisodeConfig) -> EpisodeConfig:
    """Same scene with an object that can never be touched, for ballistic checks."""
    return replace(config, material=replace(config.material, min_depth=np.inf))
