import pytest
import numpy as np
from dataclasses import replace

from taxelsim.configuration import ObservationOptions
from taxelsim.errors import ConfigError
from taxelsim.observations import assemble_observation, observation_layout
from taxelsim.rotations import encode6d
from taxelsim.state import BatchState


def zero_state(n: int = 2) -> BatchState:
    eye = np.broadcast_to(np.eye(3), (n, 3, 3)).copy()
    return BatchState(
        q=np.zeros((n, 12)),
        qd=np.zeros((n, 12)),
        tau=np.zeros((n, 12)),
        last_action=np.zeros((n, 12)),
        obj_pos=np.zeros((n, 3)),
        obj_rot=eye,
        obj_vel=np.zeros((n, 3)),
        obj_omega=np.zeros((n, 3)),
        tip_pos=np.zeros((n, 5, 3)),
        tip_rot=np.broadcast_to(np.eye(3), (n, 5, 3, 3)).copy(),
        tip_vel=np.zeros((n, 5, 6)),
        tactile_force=np.zeros((n, 5)),
        contact_center=np.zeros((n, 5, 3)),
        active_count=np.zeros((n, 5), dtype=int),
        observed_pos=np.zeros((n, 3)),
        observed_vel=np.zeros((n, 3)),
        f_cmd=np.zeros(n),
        goal_rot=eye.copy(),
        start_pos=np.zeros((n, 3)),
        successes=np.zeros(n, dtype=int),
        hold_steps=np.zeros(n, dtype=int),
        done=np.zeros(n, dtype=bool),
    )


def test_default_sizes():
    grasp = observation_layout("grasp", ObservationOptions())
    rotate = observation_layout("rotate", ObservationOptions())
    assert (grasp.actor_dim, grasp.critic_dim) == (66, 66)
    assert (rotate.actor_dim, rotate.critic_dim) == (65, 149)

@pytest.mark.parametrize(
    ("task", "options", "actor", "critic"),
    [
        ("grasp", {"contact_force": False}, 61, 61),
        ("grasp", {"contact_center": "none"}, 51, 51),
        ("rotate", {"orientation": "quaternion"}, 63, 145),
        ("rotate", {"orientation": "none"}, 59, 137),
        ("rotate", {"contact_force": False, "contact_center": "none"}, 45, 129),
    ],
)
def test_ablation_sizes(task, options, actor, critic):
    layout = observation_layout(task, ObservationOptions(**options))
    assert (layout.actor_dim, layout.critic_dim) == (actor, critic)

def test_actor_slices_are_a_subset_of_critic():
    layout = observation_layout("rotate", ObservationOptions())
    actor, critic = layout.actor_slices, layout.critic_slices
    assert set(actor) < set(critic)
    assert all(not s.actor for s in layout.slots if s.name not in actor)
    descriptor = {d["name"]: d for d in layout.describe()}
    assert descriptor["object_orientation"]["actor_offset"] is None
    assert descriptor["joint_angles"]["actor_offset"] == descriptor["joint_angles"]["critic_offset"] == 0

def test_zero_grasp_state_is_all_zero():
    layout = observation_layout("grasp", ObservationOptions())
    obs = assemble_observation(zero_state(), "grasp", ObservationOptions(), layout, np.ones(12))
    assert obs.actor.shape == (2, 66)
    np.testing.assert_array_equal(obs.actor, 0.0)

def test_zero_rotate_state_only_carries_identity_rotations():
    options = ObservationOptions()
    layout = observation_layout("rotate", options)
    obs = assemble_observation(zero_state(), "rotate", options, layout, np.ones(12))
    slots = layout.unpack(obs.critic)
    identity = encode6d(np.eye(3)).as_array()
    np.testing.assert_array_equal(slots["target_orientation"][0], identity)
    np.testing.assert_array_equal(slots["object_orientation"][0], identity)
    np.testing.assert_array_equal(slots["fingertip_rotations"][0], np.tile(identity, 5))
    constant = {"target_orientation", "object_orientation", "fingertip_rotations"}
    for name, values in slots.items():
        if name not in constant:
            np.testing.assert_array_equal(values, 0.0)

def test_target_orientation_is_relative():
    options = ObservationOptions()
    layout = observation_layout("rotate", options)
    quarter = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    state = replace(zero_state(1), goal_rot=quarter[None])
    slots = layout.unpack(assemble_observation(state, "rotate", options, layout, np.ones(12)).actor, critic=False)
    np.testing.assert_allclose(slots["target_orientation"][0], encode6d(quarter).as_array(), atol=1e-15)

def test_torque_slot_is_normalized():
    options = ObservationOptions()
    layout = observation_layout("grasp", options)
    state = replace(zero_state(1), tau=np.full((1, 12), 0.5))
    slots = layout.unpack(assemble_observation(state, "grasp", options, layout, np.full(12, 2.0)).actor, critic=False)
    np.testing.assert_array_equal(slots["joint_torque"], 0.25)

def test_unknown_orientation_mode():
    with pytest.raises(ConfigError) as e:
        ObservationOptions(orientation="euler")
    assert e.value.path == "observation.orientation"
