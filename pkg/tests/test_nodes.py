import pytest
import numpy as np
from unittest.mock import Mock, patch

from taxelsim.env import VecEnv
from taxelsim.errors import ConfigError, PoisonedStateError, PolicyError
from taxelsim.nodes import query_policy, reset_envs, step_envs
from taxelsim.policies import ScriptedClosePolicy, ZeroPolicy
from taxelsim.state import EpisodeState

def reset_state(grasp_config, hand_model, env_indices=(0, 1)):
    state = EpisodeState(config=grasp_config, seed=1, env_indices=list(env_indices), policy=ZeroPolicy(hand_model))
    update = reset_envs(state, {"configurable": {}})
    return EpisodeState(**{**vars(state), **update})

def test_reset_envs(grasp_config, hand_model, caplog):
    with caplog.at_level('INFO'):
        state = reset_state(grasp_config, hand_model)
        assert isinstance(state.env, VecEnv)
        assert state.observation.actor.shape == (2, 66)
        assert state.step_index == 0
        assert state.done is False
        assert "[reset_envs] Observation sizes: actor 66, critic 66" in caplog.text

@patch('taxelsim.nodes.load_hand_model')
def test_reset_envs_uses_configured_hand_model(mock_load, grasp_config, hand_model, monkeypatch):
    monkeypatch.delenv("TAXELSIM_HAND_MODEL", raising=False)
    mock_load.return_value = hand_model
    state = EpisodeState(config=grasp_config, seed=1, env_indices=[0])
    reset_envs(state, {"configurable": {"hand_model": "custom_hand.json"}})
    mock_load.assert_called_once_with("custom_hand.json")

def test_reset_envs_accepts_names():
    state = EpisodeState(config="rotate", policy="scripted-close")
    update = reset_envs(state, {"configurable": {}})
    assert update["config"].task == "rotate"
    assert isinstance(update["policy"], ScriptedClosePolicy)
    assert update["env_indices"] == [0]
    assert update["observation"].actor.shape == (1, 65)

def test_reset_envs_accepts_dict_config_and_default_policy():
    state = EpisodeState(config={"task": "grasp", "max_steps": 3}, env_indices=[4])
    update = reset_envs(state, {"configurable": {}})
    assert update["config"].max_steps == 3
    assert isinstance(update["policy"], ZeroPolicy)
    assert update["env"].env_indices == [4]

def test_reset_envs_unknown_policy_name():
    state = EpisodeState(config="grasp", policy="teleop")
    with pytest.raises(ConfigError) as e:
        reset_envs(state, {"configurable": {}})
    assert e.value.path == "policy"

def test_query_policy(grasp_config, hand_model):
    state = reset_state(grasp_config, hand_model)
    result = query_policy(state)
    assert result["action"].shape == (2, 12)
    np.testing.assert_array_equal(result["action"], 0.0)

def test_query_policy_error_handling(grasp_config, hand_model, caplog):
    state = reset_state(grasp_config, hand_model)
    state.policy = Mock(side_effect=RuntimeError("Test error"))
    with caplog.at_level('ERROR'):
        with pytest.raises(PolicyError) as e:
            query_policy(state)
        assert "[query_policy error] Test error" in caplog.text
    assert e.value.step == 0
    assert "policy raised RuntimeError: Test error" in str(e.value)

@pytest.mark.parametrize(
    ("action", "message"),
    [
        (np.zeros((2, 11)), "action shape (2, 11), expected (2, 12)"),
        (np.full((2, 12), np.nan), "non-finite action"),
    ],
)
def test_query_policy_rejects_bad_actions(action, message, grasp_config, hand_model, caplog):
    state = reset_state(grasp_config, hand_model)
    state.policy = Mock(return_value=action)
    with caplog.at_level('ERROR'):
        with pytest.raises(PolicyError):
            query_policy(state)
        assert message in caplog.text

def test_step_envs(grasp_config, hand_model, caplog):
    state = reset_state(grasp_config, hand_model)
    state.action = np.zeros((2, 12))
    with caplog.at_level('DEBUG'):
        result = step_envs(state)
        assert result["step_index"] == 1
        assert len(result["records"]) == 1
        assert result["done"] is False
        assert "[step_envs] Step 1: 2 live envs" in caplog.text

def test_step_envs_error_handling(grasp_config, hand_model, caplog):
    state = reset_state(grasp_config, hand_model)
    state.action = np.zeros((2, 12))
    with patch.object(state.env, "step", side_effect=PoisonedStateError("[step 1] env 0: non-finite q")):
        with caplog.at_level('ERROR'):
            with pytest.raises(PoisonedStateError):
                step_envs(state)
            assert "[step_envs error] [step 1] env 0: non-finite q" in caplog.text
