import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Union

import numpy as np
from scipy import stats

from taxelsim.configuration import Configuration, EpisodeConfig
from taxelsim.errors import ConfigError
from taxelsim.graph import graph, recursion_limit
from taxelsim.kinematics import load_hand_model
from taxelsim.policies import ExternalStdinPolicy, Policy, make_policy
from taxelsim.state import EpisodeStateInput, EpisodeTrace
from taxelsim.utils import SCHEMA_VERSION

logger = logging.getLogger(__name__)

PolicySpec = Union[str, Policy]


def _resolve_policy(policy: PolicySpec, config: EpisodeConfig, configurable: Configuration) -> Policy:
    if not isinstance(policy, str):
        return policy
    model = load_hand_model(config.hand_model or configurable.hand_model)
    return make_policy(policy, model)


def _invoke(config: EpisodeConfig, seed: int, env_indices: list, policy: Policy, configurable: Configuration) -> list:
    result = graph.invoke(
        EpisodeStateInput(config=config, seed=seed, env_indices=env_indices, policy=policy),
        config={
            "recursion_limit": recursion_limit(config.max_steps),
            "configurable": {"hand_model": configurable.hand_model},
        },
    )
    return result["traces"]


def run_episode(
    config: EpisodeConfig,
    seed: int,
    policy: PolicySpec = "zero",
    env_index: int = 0,
    configurable: Optional[Configuration] = None,
) -> EpisodeTrace:
    """Run one environment to termination or truncation.

    Args:
        config: Validated episode config
        seed: Master seed
        policy: Policy name or callable
        env_index: Global index selecting the environment's random stream

    Returns:
        EpisodeTrace: The environment's header, step rows and tactile rows
    """
    configurable = configurable or Configuration.from_runnable_config()
    traces = _invoke(config, seed, [env_index], _resolve_policy(policy, config, configurable), configurable)
    return traces[0]


def chunk_indices(n_envs: int, n_chunks: int) -> list[list[int]]:
    """Split ``range(n_envs)`` into at most ``n_chunks`` contiguous, non-empty pieces."""
    n_chunks = max(1, min(n_chunks, n_envs))
    return [part.tolist() for part in np.array_split(np.arange(n_envs), n_chunks)]


def run_batch(
    config: EpisodeConfig,
    seed: int,
    n_envs: int,
    policy: PolicySpec = "zero",
    threads: Optional[int] = None,
    configurable: Optional[Configuration] = None,
) -> list[EpisodeTrace]:
    """Run ``n_envs`` environments in contiguous chunks on a thread pool.

    Environment ``i`` always draws from stream ``i`` so the traces do not depend
    on the chunking. A policy that talks over stdin keeps the whole batch in one
    chunk.

    Returns:
        list: EpisodeTrace per environment, ordered by env index
    """
    if n_envs < 1:
        raise ConfigError("envs", "must be >= 1")
    configurable = configurable or Configuration.from_runnable_config()
    threads = threads or configurable.threads
    resolved = _resolve_policy(policy, config, configurable)
    if isinstance(resolved, ExternalStdinPolicy):
        threads = 1
    chunks = chunk_indices(n_envs, threads)
    logger.info(f"[run_batch] {n_envs} envs in {len(chunks)} chunks, task {config.task}, seed {seed}")
    if len(chunks) == 1:
        return _invoke(config, seed, chunks[0], resolved, configurable)
    with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
        futures = [pool.submit(_invoke, config, seed, chunk, resolved, configurable) for chunk in chunks]
        return [trace for future in futures for trace in future.result()]


def _rotation_metrics(trace: EpisodeTrace) -> dict:
    dt = trace.header["dt"]
    steps = trace.steps
    success_steps = steps.loc[steps["success"] == 1, "step"].to_numpy()
    fell = steps.loc[steps["terminated"] == 1, "step"].to_numpy()
    return {
        "consecutive_successes": int(len(success_steps)),
        "mean_time_per_success": float(success_steps[-1] * dt / len(success_steps)) if len(success_steps) else None,
        "time_to_fall": float(fell[0] * dt) if len(fell) else None,
    }


def _mean_contact_force(trace: EpisodeTrace) -> float:
    if trace.tactile.empty:
        return 0.0
    per_step = trace.tactile.groupby("step")["F"].sum()
    return float(per_step.mean())


def force_tracking_correlation(traces: list[EpisodeTrace]) -> Optional[float]:
    """Pearson correlation between each environment's F_cmd and its mean total contact force.

    Returns:
        float or None: None with fewer than two environments or a constant series
    """
    if len(traces) < 2:
        return None
    f_cmd = np.array([t.header["draw"]["f_cmd"] for t in traces])
    force = np.array([_mean_contact_force(t) for t in traces])
    if np.ptp(f_cmd) == 0 or np.ptp(force) == 0:
        return None
    return float(stats.pearsonr(f_cmd, force)[0])


def summarize(traces: list[EpisodeTrace]) -> dict:
    """Aggregate traces into the schema-versioned run summary."""
    task = traces[0].header["task"] if traces else None
    envs = []
    for trace in traces:
        steps = trace.steps
        entry = {
            "env_index": trace.env_index,
            "total_reward": float(steps["reward"].sum()) if len(steps) else 0.0,
            "successes": int(steps["successes"].iloc[-1]) if len(steps) else 0,
            "steps": int(len(steps)),
        }
        if task == "rotate":
            entry.update(_rotation_metrics(trace))
        envs.append(entry)
    summary = {
        "schema_version": SCHEMA_VERSION,
        "task": task,
        "envs": envs,
        "mean_reward": float(np.mean([e["total_reward"] for e in envs])) if envs else None,
        "force_tracking_correlation": force_tracking_correlation(traces) if task == "grasp" else None,
    }
    if task == "rotate" and envs:
        summary["mean_consecutive_successes"] = float(np.mean([e["consecutive_successes"] for e in envs]))
    return summary
