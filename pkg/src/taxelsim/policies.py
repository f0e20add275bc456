"""Action providers for the episode loop.

A policy is a callable ``(observation, step_index) -> (n_envs, dof)`` array of
target joint positions.
"""

from __future__ import annotations

import json
import sys
from typing import Callable, TextIO

import numpy as np

from taxelsim.errors import ConfigError
from taxelsim.kinematics import HandModel
from taxelsim.state import Observation

Policy = Callable[[Observation, int], np.ndarray]
POLICIES = ("zero", "scripted-close", "scripted-rotate", "external-stdin")

CLOSED_POSTURE = {"abduction": 0.0, "rotation": 0.4, "proximal": 1.0, "distal": 0.8}


def _role_array(model: HandModel, values: dict) -> np.ndarray:
    return np.array([values[j.role] for j in model.joints], dtype=float)


class ZeroPolicy:
    """Hold the rest pose."""

    def __init__(self, model: HandModel):
        self.dof = model.dof

    def __call__(self, observation: Observation, step: int) -> np.ndarray:
        return np.zeros((observation.actor.shape[0], self.dof))


class ScriptedClosePolicy:
    """Ramp linearly from the rest pose to a closed grasp over ``ramp_steps`` steps."""

    def __init__(self, model: HandModel, ramp_steps: int = 60):
        closed = _role_array(model, CLOSED_POSTURE)
        self.closed = np.clip(closed, model.lower_limits, model.upper_limits)
        self.ramp_steps = ramp_steps

    def __call__(self, observation: Observation, step: int) -> np.ndarray:
        fraction = min(1.0, (step + 1) / self.ramp_steps)
        return np.tile(fraction * self.closed, (observation.actor.shape[0], 1))


class ScriptedRotatePolicy:
    """Periodic finger gait; neighbouring fingers are a fifth of a period apart."""

    def __init__(self, model: HandModel, period: int = 40):
        self.model = model
        self.period = period
        self.base = _role_array(model, {"abduction": 0.0, "rotation": 0.3, "proximal": 0.6, "distal": 0.5})
        self.amplitude = _role_array(model, {"abduction": 0.1, "rotation": 0.2, "proximal": 0.25, "distal": 0.2})
        finger_of_joint = np.concatenate([np.full(len(f.joints), i) for i, f in enumerate(model.fingers)])
        self.phase = 2.0 * np.pi * finger_of_joint / len(model.fingers)

    def __call__(self, observation: Observation, step: int) -> np.ndarray:
        angle = 2.0 * np.pi * step / self.period + self.phase
        target = np.clip(self.base + self.amplitude * np.sin(angle), self.model.lower_limits, self.model.upper_limits)
        return np.tile(target, (observation.actor.shape[0], 1))


class ExternalStdinPolicy:
    """Newline-delimited JSON exchange with an external trainer.

    Each step writes one line, ``{"step": k, "actor": [[...], ...], "critic": [[...], ...]}``,
    then reads one line holding a JSON array of ``n_envs`` action vectors (a single
    flat vector is accepted when there is one environment).
    """

    def __init__(self, model: HandModel, stdin: TextIO = None, stdout: TextIO = None):
        self.dof = model.dof
        self.stdin = stdin or sys.stdin
        self.stdout = stdout or sys.stdout

    def __call__(self, observation: Observation, step: int) -> np.ndarray:
        message = {"step": step, "actor": observation.actor.tolist(), "critic": observation.critic.tolist()}
        self.stdout.write(json.dumps(message) + "\n")
        self.stdout.flush()
        line = self.stdin.readline()
        if not line:
            raise EOFError("action stream closed")
        action = np.asarray(json.loads(line), dtype=float)
        if action.ndim == 1:
            action = action[None]
        return action


def make_policy(name: str, model: HandModel, **kwargs) -> Policy:
    if name == "zero":
        return ZeroPolicy(model)
    if name == "scripted-close":
        return ScriptedClosePolicy(model, **kwargs)
    if name == "scripted-rotate":
        return ScriptedRotatePolicy(model, **kwargs)
    if name == "external-stdin":
        return ExternalStdinPolicy(model, **kwargs)
    raise ConfigError("policy", f"expected one of {POLICIES}, got {name!r}")
