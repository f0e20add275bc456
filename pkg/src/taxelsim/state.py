import operator
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Union

import numpy as np
import pandas as pd
from typing_extensions import Annotated

from taxelsim.kinematics import JointState
from taxelsim.randomization import EpisodeDraw
from taxelsim.rotations import Transform


@dataclass(frozen=True)
class EnvState:
    """One environment's state, as seen by a single-episode consumer."""

    joint_state: JointState
    object_pose: Transform
    object_linear_velocity: np.ndarray
    object_angular_velocity: np.ndarray
    tactile_force: np.ndarray  # (5,) F_i
    contact_center: np.ndarray  # (5, 3) mu_i
    active_count: np.ndarray  # (5,)
    applied_torques: np.ndarray
    last_action: np.ndarray
    goal: Any  # F_cmd (grasp) or the target rotation matrix (rotate)
    step_index: int
    draw: EpisodeDraw


@dataclass(frozen=True, kw_only=True)
class BatchState:
    """State of N environments as stacked arrays; replaced, never mutated, on every step."""

    q: np.ndarray  # (N, 12)
    qd: np.ndarray
    tau: np.ndarray
    last_action: np.ndarray
    obj_pos: np.ndarray  # (N, 3)
    obj_rot: np.ndarray  # (N, 3, 3)
    obj_vel: np.ndarray
    obj_omega: np.ndarray
    tip_pos: np.ndarray  # (N, 5, 3)
    tip_rot: np.ndarray  # (N, 5, 3, 3)
    tip_vel: np.ndarray  # (N, 5, 6) linear then angular
    tactile_force: np.ndarray  # (N, 5)
    contact_center: np.ndarray  # (N, 5, 3)
    active_count: np.ndarray  # (N, 5)
    observed_pos: np.ndarray  # object position as the policy sees it
    observed_vel: np.ndarray
    f_cmd: np.ndarray  # (N,)
    goal_rot: np.ndarray  # (N, 3, 3)
    start_pos: np.ndarray
    successes: np.ndarray  # (N,) int
    hold_steps: np.ndarray  # (N,) int
    done: np.ndarray  # (N,) bool
    step_index: int = 0

    def __len__(self) -> int:
        return self.q.shape[0]

    def env(self, i: int, draw: EpisodeDraw, task: str) -> EnvState:
        return EnvState(
            joint_state=JointState(self.q[i], self.qd[i]),
            object_pose=Transform(self.obj_pos[i], self.obj_rot[i]),
            object_linear_velocity=self.obj_vel[i],
            object_angular_velocity=self.obj_omega[i],
            tactile_force=self.tactile_force[i],
            contact_center=self.contact_center[i],
            active_count=self.active_count[i],
            applied_torques=self.tau[i],
            last_action=self.last_action[i],
            goal=float(self.f_cmd[i]) if task == "grasp" else self.goal_rot[i],
            step_index=self.step_index,
            draw=draw,
        )


@dataclass(frozen=True)
class Observation:
    actor: np.ndarray  # (N, actor_dim)
    critic: np.ndarray  # (N, critic_dim)
    layout: Any


@dataclass(frozen=True)
class StepResult:
    """Outcome of one batched step; per-env arrays along axis 0."""

    observation: Observation
    reward: np.ndarray
    terms: dict
    terminated: np.ndarray
    truncated: np.ndarray
    success_event: np.ndarray
    state: BatchState
    active: np.ndarray  # envs that actually stepped


@dataclass
class EpisodeTrace:
    """Everything recorded for one environment: a JSON header plus step and tactile rows."""

    env_index: int
    header: dict
    steps: pd.DataFrame = field(default_factory=pd.DataFrame)
    tactile: pd.DataFrame = field(default_factory=pd.DataFrame)


@dataclass(kw_only=True)
class EpisodeState:
    config: Any = field(default=None)  # EpisodeConfig
    seed: int = field(default=0)
    env_indices: list = field(default_factory=list)
    policy: Union[str, Callable, None] = field(default=None)
    env: Any = field(default=None)  # VecEnv
    observation: Optional[Observation] = field(default=None)
    action: Optional[np.ndarray] = field(default=None)
    step_index: int = field(default=0)
    done: bool = field(default=False)
    records: Annotated[list, operator.add] = field(default_factory=list)  # one StepResult per step
    traces: list = field(default_factory=list)


@dataclass(kw_only=True)
class EpisodeStateInput:
    config: Any = field(default=None)  # EpisodeConfig, task name, path or dict
    seed: int = field(default=0)
    env_indices: list = field(default_factory=list)
    policy: Union[str, Callable, None] = field(default=None)


@dataclass(kw_only=True)
class EpisodeStateOutput:
    traces: list = field(default_factory=list)
