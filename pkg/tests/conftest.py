import pytest
import numpy as np
from dotenv import load_dotenv

from taxelsim.configuration import load_episode_config
from taxelsim.kinematics import load_hand_model

@pytest.fixture(autouse=True)
def load_env():
    """Automatically load environment variables from .env file for all tests."""
    load_dotenv()

@pytest.fixture
def mock_env_vars(monkeypatch):
    """Mock environment variables for testing."""
    monkeypatch.setenv("TAXELSIM_THREADS", "2")
    monkeypatch.setenv("TAXELSIM_LOG_LEVEL", "DEBUG")
    monkeypatch.setenv("TAXELSIM_TRACE_PRECISION", "12")
    return {
        "TAXELSIM_THREADS": "2",
        "TAXELSIM_LOG_LEVEL": "DEBUG",
        "TAXELSIM_TRACE_PRECISION": "12",
    }

@pytest.fixture(scope="session")
def hand_model():
    return load_hand_model()

@pytest.fixture
def rng():
    return np.random.default_rng(12345)

@pytest.fixture
def grasp_config():
    """A short grasp episode config."""
    return load_episode_config({"task": "grasp", "max_steps": 5})

@pytest.fixture
def rotate_config():
    """A short rotation episode config with a cube."""
    return load_episode_config({
        "task": "rotate",
        "object": {"shape": {"type": "box", "half_extents": [0.02, 0.02, 0.02]}, "initial_position": [0.0, 0.0, 0.09]},
        "max_steps": 5,
    })
