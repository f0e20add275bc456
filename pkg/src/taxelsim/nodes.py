import logging

import numpy as np
from langchain_core.runnables import RunnableConfig

from taxelsim.configuration import Configuration, resolve_episode_config
from taxelsim.env import VecEnv
from taxelsim.errors import PolicyError, TaxelSimError
from taxelsim.kinematics import load_hand_model
from taxelsim.policies import make_policy
from taxelsim.state import EpisodeState

# Configure logging
logger = logging.getLogger(__name__)


def reset_envs(state: EpisodeState, config: RunnableConfig) -> dict:
    """
    Node that builds the batch of environments and draws their episodes.

    The episode config may arrive as a loaded EpisodeConfig, a bundled task
    name, a JSON path or a parsed dict, and the policy as a callable or a
    policy name, so the graph can also be driven from LangGraph Studio.

    Args:
        state: EpisodeState carrying the episode config, seed and env indices
        config: RunnableConfig whose configurable values override TAXELSIM_* settings

    Returns:
        dict: The environment, its first observation and a reset step counter
    """
    configurable = Configuration.from_runnable_config(config)
    episode = resolve_episode_config(state.config)
    model = load_hand_model(episode.hand_model or configurable.hand_model)
    policy = state.policy
    if policy is None or isinstance(policy, str):
        policy = make_policy(policy or "zero", model)
    env_indices = list(state.env_indices) or [0]
    env = VecEnv(episode, model, state.seed, env_indices)
    observation = env.reset()
    logger.info(f"[reset_envs] Observation sizes: actor {env.layout.actor_dim}, critic {env.layout.critic_dim}")
    return {
        "config": episode,
        "policy": policy,
        "env_indices": env_indices,
        "env": env,
        "observation": observation,
        "step_index": 0,
        "done": False,
    }


def query_policy(state: EpisodeState) -> dict:
    """
    Node that asks the policy for the next batch of target joint positions.

    Args:
        state: EpisodeState with the latest observation

    Returns:
        dict: The validated (n_envs, dof) action
    """
    env = state.env
    try:
        action = np.asarray(state.policy(state.observation, state.step_index), dtype=float)
    except Exception as e:
        logger.error(f"[query_policy error] {e}")
        raise PolicyError(state.step_index, f"policy raised {type(e).__name__}: {e}") from e
    expected = (env.n, env.model.dof)
    if action.shape != expected:
        logger.error(f"[query_policy error] action shape {action.shape}, expected {expected}")
        raise PolicyError(state.step_index, f"action shape {action.shape}, expected {expected}")
    if not np.all(np.isfinite(action)):
        logger.error("[query_policy error] non-finite action")
        raise PolicyError(state.step_index, "policy returned non-finite values")
    return {"action": action}


def step_envs(state: EpisodeState) -> dict:
    """
    Node that advances every live environment by one control period.

    Args:
        state: EpisodeState with the action chosen by query_policy

    Returns:
        dict: New observation, the step record and the episode-done flag
    """
    env = state.env
    try:
        result = env.step(state.action)
    except TaxelSimError as e:
        logger.error(f"[step_envs error] {e}")
        raise
    live = int(np.sum(result.active))
    logger.debug(f"[step_envs] Step {result.state.step_index}: {live} live envs, mean reward {float(np.mean(result.reward[result.active])):.4f}")
    return {
        "observation": result.observation,
        "records": [result],
        "step_index": result.state.step_index,
        "done": env.all_done,
    }
