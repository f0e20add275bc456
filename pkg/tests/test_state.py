import pytest
import numpy as np
import pandas as pd

from taxelsim.state import EpisodeState, EpisodeStateInput, EpisodeStateOutput, EpisodeTrace

def test_episode_state_initialization():
    # Test default initialization
    state = EpisodeState()
    assert state.config is None
    assert state.seed == 0
    assert state.env_indices == []
    assert state.policy is None
    assert state.env is None
    assert state.observation is None
    assert state.action is None
    assert state.step_index == 0
    assert state.done is False
    assert state.records == []
    assert state.traces == []

    # Test initialization with values
    state = EpisodeState(seed=7, env_indices=[2, 3], step_index=4, done=True, records=["r1"])
    assert state.seed == 7
    assert state.env_indices == [2, 3]
    assert state.step_index == 4
    assert state.done is True
    assert state.records == ["r1"]

def test_default_lists_are_not_shared():
    a, b = EpisodeState(), EpisodeState()
    a.records.append("r1")
    assert b.records == []

def test_episode_state_input(grasp_config):
    # Test default initialization
    state_input = EpisodeStateInput()
    assert state_input.config is None
    assert state_input.env_indices == []

    # Test initialization with values
    state_input = EpisodeStateInput(config=grasp_config, seed=3, env_indices=[0])
    assert state_input.config.task == "grasp"
    assert state_input.seed == 3

def test_episode_state_output():
    # Test default initialization
    state_output = EpisodeStateOutput()
    assert state_output.traces == []

    # Test initialization with value
    trace = EpisodeTrace(env_index=1, header={"task": "grasp"})
    state_output = EpisodeStateOutput(traces=[trace])
    assert state_output.traces[0].env_index == 1
    assert isinstance(trace.steps, pd.DataFrame) and trace.steps.empty

def test_env_view(grasp_config, hand_model):
    from taxelsim.env import VecEnv

    env = VecEnv(grasp_config, hand_model, 5, [4, 9])
    env.reset()
    view = env.env_state(1)
    assert view.draw.stream_index == 9
    assert view.goal == pytest.approx(view.draw.f_cmd)
    np.testing.assert_array_equal(view.joint_state.positions, env.state.q[1])
    assert view.step_index == 0
