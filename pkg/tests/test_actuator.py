import pytest
import numpy as np

from taxelsim.actuator import (
    ActuatorParams,
    ActuatorRanges,
    apply_backlash,
    pd_torque,
    sample_params,
    saturate,
    step_actuator,
    torque_envelope,
)
from taxelsim.errors import ConfigError


def params(**overrides):
    values = dict(kp=2.0, kd=0.1, backlash_eps=0.0, stall_torque=0.8, no_load_speed=10.0, efficiency=1.0)
    values.update(overrides)
    return ActuatorParams(**values)


def test_pd_torque():
    assert pd_torque(params(), 0.5, 0.0, 0.0, 1.0) == pytest.approx(0.9)
    assert pd_torque(params(), 0.3, 0.3, 0.0, 0.0) == 0.0
    assert pd_torque(params(kd=0.0), 1.0, 0.0, 0.0, 5.0) == 2.0

def test_backlash_deadband():
    p = params(backlash_eps=0.01)
    assert apply_backlash(p, 0.9, 0.005, 0.0) == 0.0
    assert apply_backlash(p, 0.9, 0.02, 0.0) == 0.9
    assert apply_backlash(params(), 0.9, 0.0, 0.0) == 0.9

def test_saturation():
    assert saturate(params(), 0.9, 5.0) == pytest.approx(0.4)
    assert saturate(params(), -0.9, -5.0) == pytest.approx(-0.4)
    assert saturate(params(), 0.9, 12.0) == 0.0
    assert saturate(params(efficiency=0.5), 0.2, 0.0) == pytest.approx(0.1)

def test_envelope_is_floored_past_no_load_speed():
    np.testing.assert_array_equal(torque_envelope(params(), np.array([10.0, 15.0, -30.0])), 0.0)

def test_step_actuator():
    assert step_actuator(params(), 0.0, 0.0) == 0.0
    assert step_actuator(params(backlash_eps=0.01), 0.5, 0.0) == pytest.approx(0.8)
    assert step_actuator(params(kp=1e6, backlash_eps=0.01), 0.005, 0.0) == 0.0

def test_step_actuator_broadcasts_over_joints():
    p = params(kp=np.array([1.0, 2.0, 3.0]))
    tau = step_actuator(p, np.full(3, 0.1), np.zeros(3))
    np.testing.assert_allclose(tau, [0.1, 0.2, 0.3])

@pytest.mark.slow
def test_envelope_bound_fuzz(rng):
    n = 100_000
    p = sample_params(ActuatorRanges(), rng, n_joints=n)
    q_ref, q_m = rng.uniform(-2.0, 2.0, size=(2, n))
    qd_ref, qd_m = rng.uniform(-15.0, 15.0, size=(2, n))
    tau = step_actuator(p, q_ref, q_m, qd_ref, qd_m)
    assert np.all(np.abs(tau) <= p.efficiency * torque_envelope(p, qd_m) + 1e-15)
    inside = np.abs(q_ref - q_m) < p.backlash_eps
    assert np.all(tau[inside] == 0.0)

def test_point_intervals_are_deterministic(rng):
    ranges = ActuatorRanges(
        kp=(3.0, 3.0), kd=(0.1, 0.1), backlash_eps=(0.0, 0.0),
        stall_torque=(1.0, 1.0), no_load_speed=(8.0, 8.0), efficiency=(0.9, 0.9),
    )
    p = sample_params(ranges, rng)
    assert (p.kp, p.kd, p.backlash_eps, p.stall_torque, p.no_load_speed, p.efficiency) == (3.0, 0.1, 0.0, 1.0, 8.0, 0.9)

def test_same_seed_same_params():
    a = sample_params(ActuatorRanges(), np.random.default_rng(3), n_joints=12)
    b = sample_params(ActuatorRanges(), np.random.default_rng(3), n_joints=12)
    assert a.to_dict() == b.to_dict()

def test_efficiency_mean(rng):
    p = sample_params(ActuatorRanges(), rng, n_joints=10_000)
    assert np.mean(p.efficiency) == pytest.approx(0.85, abs=0.01)
    assert np.all((p.efficiency >= 0.7) & (p.efficiency <= 1.0))

def test_inverted_range_is_a_config_error():
    with pytest.raises(ConfigError) as e:
        ActuatorRanges.from_dict({"kp": [3.0, 2.0]})
    assert e.value.path == "randomization.actuator.kp"

def test_unknown_parameter():
    with pytest.raises(ConfigError) as e:
        ActuatorRanges.from_dict({"gear_ratio": [1.0, 2.0]})
    assert e.value.path == "randomization.actuator.gear_ratio"

def test_invalid_efficiency():
    with pytest.raises(ConfigError) as e:
        params(efficiency=1.5).validate()
    assert e.value.path == "actuator.efficiency"
