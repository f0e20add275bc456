import json
from dataclasses import fields
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from taxelsim.errors import ConfigError
from taxelsim.state import EpisodeTrace

SCHEMA_VERSION = 1
FLAG_COLUMNS = ("terminated", "truncated", "success", "successes")
TACTILE_COLUMNS = ("step", "finger", "F", "mu_x", "mu_y", "mu_z", "active_count")


def dataclass_from_dict(cls, data: Any, path: str):
    """Build dataclass ``cls`` from a JSON object, naming the bad key on failure.

    Args:
        cls: Dataclass type whose init fields are the accepted keys
        data: Parsed JSON object (missing keys keep their defaults)
        path: JSON path of ``data`` used in error messages

    Returns:
        An instance of ``cls``.
    """
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(path, "expected an object")
    known = {f.name for f in fields(cls) if f.init}
    for key in data:
        if key not in known:
            raise ConfigError(f"{path}.{key}", "unknown field")
    values = {}
    for f in fields(cls):
        if f.name not in data:
            continue
        value = data[f.name]
        values[f.name] = tuple(value) if isinstance(value, list) else value
    try:
        return cls(**values)
    except ConfigError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(path, str(e)) from e


def step_columns(dof: int, term_names, critic_dim: int) -> list[str]:
    """Column order of a step trace."""
    return (
        ["step", "reward"]
        + [f"r_{name}" for name in term_names]
        + list(FLAG_COLUMNS)
        + ["obj_x", "obj_y", "obj_z", "obj_vx", "obj_vy", "obj_vz"]
        + [f"q_{i}" for i in range(dof)]
        + [f"tau_{i}" for i in range(dof)]
        + [f"action_{i}" for i in range(dof)]
        + [f"obs_{i}" for i in range(critic_dim)]
    )


def _step_matrix(result, term_names) -> np.ndarray:
    s = result.state
    n = len(s)
    return np.concatenate(
        [
            np.full((n, 1), float(s.step_index)),
            result.reward[:, None],
            np.stack([result.terms[name] for name in term_names], axis=1),
            np.stack([result.terminated, result.truncated, result.success_event, s.successes], axis=1).astype(float),
            s.obj_pos,
            s.obj_vel,
            s.q,
            s.tau,
            s.last_action,
            result.observation.critic,
        ],
        axis=1,
    )


def _tactile_matrix(result) -> np.ndarray:
    s = result.state
    n, f = s.tactile_force.shape
    return np.concatenate(
        [
            np.full((n, f, 1), float(s.step_index)),
            np.broadcast_to(np.arange(f, dtype=float)[None, :, None], (n, f, 1)),
            s.tactile_force[..., None],
            s.contact_center,
            s.active_count[..., None].astype(float),
        ],
        axis=2,
    )


def build_traces(env, records) -> list[EpisodeTrace]:
    """Split batched ``StepResult`` records into one ``EpisodeTrace`` per environment.

    Args:
        env: The VecEnv that produced the records
        records: StepResult per control step, in order

    Returns:
        list: EpisodeTrace per environment, in batch order; steps after an
        environment finished are not recorded
    """
    term_names = env.term_names
    columns = step_columns(env.model.dof, term_names, env.layout.critic_dim)
    if records:
        steps = np.stack([_step_matrix(r, term_names) for r in records], axis=1)  # (N, T, C)
        tactile = np.stack([_tactile_matrix(r) for r in records], axis=1)  # (N, T, F, 7)
        active = np.stack([r.active for r in records], axis=1)  # (N, T)
    traces = []
    for k, env_index in enumerate(env.env_indices):
        header = {
            "schema_version": SCHEMA_VERSION,
            "task": env.config.task,
            "seed": env.seed,
            "env_index": env_index,
            "draw": env.draws[k].to_dict(),
            "config": env.config.to_dict(),
            "observation_layout": env.layout.describe(),
            "dt": env.config.dt,
        }
        if records:
            step_frame = pd.DataFrame(steps[k][active[k]], columns=columns)
            tactile_frame = pd.DataFrame(tactile[k][active[k]].reshape(-1, len(TACTILE_COLUMNS)), columns=list(TACTILE_COLUMNS))
        else:
            step_frame = pd.DataFrame(columns=columns)
            tactile_frame = pd.DataFrame(columns=list(TACTILE_COLUMNS))
        int_columns = ["step"] + list(FLAG_COLUMNS)
        step_frame[int_columns] = step_frame[int_columns].astype(int)
        tactile_frame[["step", "finger", "active_count"]] = tactile_frame[["step", "finger", "active_count"]].astype(int)
        traces.append(EpisodeTrace(env_index=env_index, header=header, steps=step_frame, tactile=tactile_frame))
    return traces


def write_trace(trace: EpisodeTrace, out_dir, precision: int = 17) -> dict:
    """Write ``env_<i>.json``, ``env_<i>_steps.csv`` and ``env_<i>_tactile.csv``.

    Returns:
        dict: Paths of the three files
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"env_{trace.env_index:04d}"
    paths = {
        "header": out / f"{stem}.json",
        "steps": out / f"{stem}_steps.csv",
        "tactile": out / f"{stem}_tactile.csv",
    }
    paths["header"].write_text(json.dumps(trace.header, indent=2, sort_keys=True))
    float_format = f"%.{precision}g"
    trace.steps.to_csv(paths["steps"], index=False, float_format=float_format)
    trace.tactile.to_csv(paths["tactile"], index=False, float_format=float_format)
    return paths


def write_json(data: dict, path) -> None:
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True))


def format_summary(summary: dict) -> str:
    """Format a run summary as a short human-readable block.

    Args:
        summary (dict): Output of runner.summarize

    Returns:
        str: One line per environment plus the aggregate lines
    """
    lines = [f"Task: {summary['task']}  envs: {len(summary['envs'])}"]
    for env in summary["envs"]:
        lines.append(
            f"* env {env['env_index']}: reward {env['total_reward']:.4f}, "
            f"successes {env['successes']}, steps {env['steps']}"
        )
    for key in ("mean_reward", "force_tracking_correlation"):
        if summary.get(key) is not None:
            lines.append(f"{key}: {summary[key]:.4f}")
    return "\n".join(lines)
