import pytest
import numpy as np
import pandas as pd
from unittest.mock import patch

from taxelsim.configuration import Configuration, load_episode_config
from taxelsim.policies import ExternalStdinPolicy
from taxelsim.runner import chunk_indices, force_tracking_correlation, run_batch, run_episode, summarize
from taxelsim.state import EpisodeTrace
from taxelsim.utils import write_trace

def test_chunk_indices():
    assert chunk_indices(5, 2) == [[0, 1, 2], [3, 4]]
    assert chunk_indices(2, 8) == [[0], [1]]
    assert chunk_indices(3, 0) == [[0, 1, 2]]

def test_run_episode_is_deterministic(grasp_config):
    a = run_episode(grasp_config, 7, "zero")
    b = run_episode(grasp_config, 7, "zero")
    pd.testing.assert_frame_equal(a.steps, b.steps)
    pd.testing.assert_frame_equal(a.tactile, b.tactile)
    assert a.header == b.header

def test_batch_does_not_depend_on_chunking(grasp_config):
    one = run_batch(grasp_config, 3, 4, "scripted-close", threads=1)
    many = run_batch(grasp_config, 3, 4, "scripted-close", threads=3)
    assert [t.env_index for t in many] == [0, 1, 2, 3]
    for a, b in zip(one, many):
        pd.testing.assert_frame_equal(a.steps, b.steps)
        assert a.header["draw"] == b.header["draw"]

def test_single_episode_matches_its_batch_slot(grasp_config):
    batch = run_batch(grasp_config, 3, 3, "zero", threads=1)
    single = run_episode(grasp_config, 3, "zero", env_index=2)
    pd.testing.assert_frame_equal(batch[2].steps, single.steps)

def read_dir(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir())}

@pytest.mark.slow
def test_large_batch_traces_are_byte_identical(tmp_path):
    config = load_episode_config({"task": "grasp", "max_steps": 200})
    for name, threads in (("a", 1), ("b", 4)):
        for trace in run_batch(config, 11, 512, "scripted-close", threads=threads):
            write_trace(trace, tmp_path / name)
    first, second = read_dir(tmp_path / "a"), read_dir(tmp_path / "b")
    assert len(first) == 3 * 512
    assert first == second

def test_run_batch_logging(grasp_config, caplog):
    with caplog.at_level('INFO'):
        run_batch(grasp_config, 0, 2, "zero", threads=2)
        assert "[run_batch] 2 envs in 2 chunks, task grasp, seed 0" in caplog.text

def test_threads_default_from_environment(grasp_config, mock_env_vars, caplog):
    with caplog.at_level('INFO'):
        run_batch(grasp_config, 0, 3, "zero")
        assert "3 envs in 2 chunks" in caplog.text

def test_stdin_policy_runs_in_one_chunk(grasp_config, hand_model, caplog):
    policy = ExternalStdinPolicy(hand_model)
    with patch("taxelsim.runner._invoke", return_value=[]) as mock_invoke:
        with caplog.at_level('INFO'):
            run_batch(grasp_config, 0, 4, policy, threads=4)
    mock_invoke.assert_called_once()
    assert mock_invoke.call_args.args[2] == [0, 1, 2, 3]

def test_run_batch_needs_an_env(grasp_config):
    with pytest.raises(ValueError):
        run_batch(grasp_config, 0, 0)

def trace_with(env_index, f_cmd, forces, task="grasp"):
    steps = pd.DataFrame({
        "step": [1, 2], "reward": [0.5, 0.25], "terminated": [0, 0], "truncated": [0, 1],
        "success": [0, 1], "successes": [0, 1],
    })
    tactile = pd.DataFrame({"step": [1, 1, 2, 2], "finger": [0, 1, 0, 1], "F": forces})
    header = {"task": task, "dt": 0.5, "draw": {"f_cmd": f_cmd}}
    return EpisodeTrace(env_index=env_index, header=header, steps=steps, tactile=tactile)

def test_force_tracking_correlation():
    traces = [trace_with(0, 0.1, [1.0, 1.0, 1.0, 1.0]), trace_with(1, 0.5, [2.0, 3.0, 3.0, 2.0]), trace_with(2, 0.9, [5.0, 5.0, 5.0, 5.0])]
    assert force_tracking_correlation(traces) == pytest.approx(np.corrcoef([0.1, 0.5, 0.9], [2.0, 5.0, 10.0])[0, 1])
    assert force_tracking_correlation(traces[:1]) is None
    assert force_tracking_correlation([trace_with(0, 0.2, [1.0] * 4), trace_with(1, 0.2, [2.0] * 4)]) is None

def test_summarize_grasp():
    summary = summarize([trace_with(0, 0.1, [1.0] * 4), trace_with(1, 0.9, [2.0] * 4)])
    assert summary["schema_version"] == 1
    assert summary["envs"][0] == {"env_index": 0, "total_reward": 0.75, "successes": 1, "steps": 2}
    assert summary["mean_reward"] == 0.75
    assert summary["force_tracking_correlation"] == pytest.approx(1.0)

def test_summarize_rotate():
    summary = summarize([trace_with(0, 0.0, [0.0] * 4, task="rotate")])
    env = summary["envs"][0]
    assert env["consecutive_successes"] == 1
    assert env["mean_time_per_success"] == 1.0
    assert env["time_to_fall"] is None
    assert summary["mean_consecutive_successes"] == 1.0
    assert summary["force_tracking_correlation"] is None

@pytest.mark.slow
def test_scripted_close_touches_the_sphere():
    from taxelsim.configuration import packaged_config_path

    config = load_episode_config(packaged_config_path("grasp"))
    trace = run_episode(config, 0, "scripted-close", configurable=Configuration(threads=1))
    assert trace.tactile["F"].max() > 0.0
    assert np.all(np.isfinite(trace.steps["reward"]))
