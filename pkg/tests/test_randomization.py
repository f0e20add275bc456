import pytest
import numpy as np

from taxelsim.actuator import ActuatorRanges
from taxelsim.errors import ConfigError
from taxelsim.randomization import RandomizationSpec, draw_episode, make_stream, make_streams
from taxelsim.rotations import rot_distance_batch

POINT_SPEC = RandomizationSpec(
    object_mass=(0.1, 0.1),
    object_scale=(1.0, 1.0),
    friction=(0.8, 0.8),
    restitution=(0.0, 0.0),
    damping=(1.0, 1.0),
    drop_height=(0.12, 0.12),
    initial_orientation=False,
    actuator=ActuatorRanges(
        kp=(3.0, 3.0), kd=(0.1, 0.1), backlash_eps=(0.01, 0.01),
        stall_torque=(1.0, 1.0), no_load_speed=(8.0, 8.0), efficiency=(0.9, 0.9),
    ),
    f_cmd=(0.4, 0.4),
)


def test_streams_are_deterministic():
    a = [s.random(10) for s in make_streams(42, 3)]
    b = [s.random(10) for s in make_streams(42, 3)]
    np.testing.assert_array_equal(a, b)

def test_streams_differ():
    first, second = make_streams(42, 2)
    assert np.any(first.random(1000) != second.random(1000))

def test_single_stream_is_index_zero():
    (only,) = make_streams(7, 1)
    np.testing.assert_array_equal(only.random(5), make_stream(7, 0).random(5))

def test_offset_streams_match_the_full_batch():
    tail = make_streams(7, 2, start=3)
    np.testing.assert_array_equal(tail[1].random(5), make_streams(7, 5)[4].random(5))

def test_no_streams_is_an_error():
    with pytest.raises(ConfigError):
        make_streams(0, 0)

def test_point_intervals_give_a_fixed_draw():
    draw = draw_episode(POINT_SPEC, make_stream(1, 0))
    other = draw_episode(POINT_SPEC, make_stream(2, 5))
    assert draw.object_mass == other.object_mass == 0.1
    assert draw.f_cmd == other.f_cmd == 0.4
    np.testing.assert_array_equal(draw.orientation, np.eye(3))
    np.testing.assert_array_equal(draw.actuator.kp, np.full(12, 3.0))

def test_same_stream_same_draw():
    spec = RandomizationSpec()
    assert draw_episode(spec, make_stream(9, 2), 9, 2).to_dict() == draw_episode(spec, make_stream(9, 2), 9, 2).to_dict()

def test_draws_respect_ranges():
    spec = RandomizationSpec()
    stream = make_stream(3, 0)
    for _ in range(500):
        draw = draw_episode(spec, stream)
        for name in ("object_mass", "object_scale", "friction", "restitution", "damping", "drop_height", "f_cmd"):
            low, high = getattr(spec, name)
            assert low <= getattr(draw, name) <= high
        assert np.all(draw.actuator.efficiency <= 1.0)

@pytest.mark.slow
def test_f_cmd_mean():
    stream = make_stream(11, 0)
    values = [draw_episode(RandomizationSpec(), stream).f_cmd for _ in range(100_000)]
    assert np.mean(values) == pytest.approx(0.5, abs=0.01)

@pytest.mark.slow
def test_orientations_are_uniform_on_so3():
    stream = make_stream(5, 0)
    rotations = np.stack([draw_episode(RandomizationSpec(), stream).orientation for _ in range(100_000)])
    angles = rot_distance_batch(rotations, np.broadcast_to(np.eye(3), rotations.shape))
    assert np.degrees(np.mean(angles)) == pytest.approx(126.5, abs=1.0)

@pytest.mark.parametrize(
    ("data", "path"),
    [
        ({"friction": [1.0, 0.5]}, "randomization.friction[1]"),
        ({"restitution": [-0.1, 0.2]}, "randomization.restitution[0]"),
        ({"f_cmd": [0.0, 2.0]}, "randomization.f_cmd"),
        ({"gravity": [9.0, 10.0]}, "randomization.gravity"),
        ({"object_mass": "heavy"}, "randomization.object_mass"),
    ],
)
def test_invalid_specs(data, path):
    with pytest.raises(ConfigError) as e:
        RandomizationSpec.from_dict(data)
    assert e.value.path == path

def test_spec_dict_round_trip():
    assert RandomizationSpec.from_dict(POINT_SPEC.to_dict()) == POINT_SPEC
