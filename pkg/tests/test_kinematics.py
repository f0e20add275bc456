import json

import pytest
import numpy as np

from taxelsim.errors import ConfigError, ModelMismatchError
from taxelsim.kinematics import (
    N_DOF,
    TAXELS_PER_FINGER,
    JointState,
    batch_forward_kinematics,
    default_hand_model_path,
    fk_arrays,
    forward_kinematics,
    hand_model_from_dict,
    hemisphere_grid,
    load_hand_model,
    rest_poses,
)


def test_default_model_layout(hand_model):
    assert hand_model.dof == N_DOF
    assert len(hand_model.fingers) == 5
    assert hand_model.n_taxels == 600
    assert all(f.n_taxels == TAXELS_PER_FINGER for f in hand_model.fingers)
    assert [f.name for f in hand_model.fingers] == ["thumb", "index", "middle", "ring", "little"]

def test_joint_role_indices(hand_model):
    roles = [j.role for j in hand_model.joints]
    assert all(roles[i] == "proximal" for i in hand_model.root_joint_indices)
    assert all(roles[i] == "distal" for i in hand_model.outer_joint_indices)
    assert len(hand_model.inner_joint_indices) == 4
    assert hand_model.root_joint_indices[0] not in hand_model.inner_joint_indices

def test_rest_pose_fingertips(hand_model):
    poses = rest_poses(hand_model)
    np.testing.assert_allclose(poses[0].translation, [-0.04, 0.0, 0.085], atol=1e-15)
    np.testing.assert_allclose(poses[1].translation, [0.028284271247461905, 0.028284271247461898, 0.08], atol=1e-15)

def test_thumb_flexion_moves_tip(hand_model):
    q = np.zeros(hand_model.dof)
    q[1] = np.pi / 2
    frames = forward_kinematics(hand_model, JointState(q))
    np.testing.assert_allclose(frames.fingertip_positions[0], [0.03, 0.0, 0.015], atol=1e-12)

def test_taxels_stay_on_fingertip_shell(hand_model, rng):
    q = rng.uniform(hand_model.lower_limits, hand_model.upper_limits)
    frames = forward_kinematics(hand_model, JointState(q))
    radius = np.linalg.norm(frames.world_positions - frames.fingertip_positions[:, None], axis=-1)
    np.testing.assert_allclose(radius, 0.01, atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(frames.world_normals, axis=-1), 1.0, atol=1e-12)

def test_batch_matches_single_bitwise(hand_model, rng):
    states = [JointState(rng.uniform(hand_model.lower_limits, hand_model.upper_limits)) for _ in range(8)]
    batch = batch_forward_kinematics(hand_model, states)
    for state, frames in zip(states, batch):
        single = forward_kinematics(hand_model, state)
        assert np.array_equal(single.world_positions, frames.world_positions)
        assert np.array_equal(single.world_normals, frames.world_normals)

def test_batch_of_nothing(hand_model):
    assert batch_forward_kinematics(hand_model, []) == []

def test_wrong_dimension_raises(hand_model):
    with pytest.raises(ModelMismatchError):
        forward_kinematics(hand_model, JointState(np.zeros(11)))
    with pytest.raises(ModelMismatchError):
        fk_arrays(hand_model, np.zeros((2, 13)))

def test_hemisphere_grid_is_unit_and_faces_axis():
    positions, normals = hemisphere_grid(0.01, 10, 12, axis=(1.0, 0.0, 0.0))
    assert positions.shape == (120, 3)
    np.testing.assert_allclose(np.linalg.norm(normals, axis=1), 1.0, atol=1e-15)
    assert np.all(normals[:, 0] > 0.0)

def test_load_missing_file():
    with pytest.raises(ConfigError) as e:
        load_hand_model("/nonexistent/hand.json")
    assert e.value.path == "hand_model"

def _model_document():
    return json.loads(default_hand_model_path().read_text())

def test_non_unit_axis_is_rejected():
    data = _model_document()
    data["fingers"][1]["joints"][0]["axis"] = [2.0, 0.0, 0.0]
    with pytest.raises(ConfigError) as e:
        hand_model_from_dict(data)
    assert e.value.path == "fingers[1].joints[0].axis"

def test_inverted_limits_are_rejected():
    data = _model_document()
    data["fingers"][2]["joints"][1]["limits"] = [1.0, 0.0]
    with pytest.raises(ConfigError) as e:
        hand_model_from_dict(data)
    assert e.value.path == "fingers[2].joints[1].limits"

def test_non_canonical_model_needs_flag():
    data = _model_document()
    data["fingers"] = data["fingers"][:4]
    with pytest.raises(ConfigError):
        hand_model_from_dict(data)
    model = hand_model_from_dict(data, canonical=False)
    assert len(model.fingers) == 4
