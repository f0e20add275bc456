import json
from pathlib import Path

import pytest
import numpy as np

from taxelsim.errors import ConfigError
from taxelsim.rewards import (
    GRASP_TERMS,
    ROTATION_TERMS,
    GraspRewardConfig,
    RotationRewardConfig,
    action_rate_penalty,
    consistency_penalty,
    force_reward,
    goal_bonus,
    grasp_reward_terms,
    outer_penalty,
    rotation_reward,
    rotation_reward_terms,
    torque_reward,
    velocity_penalty,
)

TABLE = json.loads((Path(__file__).parent / "data" / "reward_scenarios.json").read_text())
SCENARIOS = TABLE["scenarios"]


def evaluate(scenario: dict) -> dict:
    inputs = {**TABLE["defaults"][scenario["task"]], **scenario["inputs"]}
    inputs = {k: np.asarray(v) for k, v in inputs.items()}
    if scenario["task"] == "grasp":
        return grasp_reward_terms(**inputs, cfg=GraspRewardConfig.from_dict(scenario.get("cfg", {})))
    return rotation_reward_terms(**inputs, cfg=RotationRewardConfig.from_dict(scenario.get("cfg", {})))


def test_table_covers_both_tasks_and_every_term():
    assert len(SCENARIOS) >= 20
    assert len({s["name"] for s in SCENARIOS}) == len(SCENARIOS)
    grasp = set().union(*(s["expected"] for s in SCENARIOS if s["task"] == "grasp"))
    rotate = set().union(*(s["expected"] for s in SCENARIOS if s["task"] == "rotate"))
    assert set(GRASP_TERMS) <= grasp
    assert set(ROTATION_TERMS) <= rotate

@pytest.mark.parametrize("scenario", SCENARIOS, ids=[s["name"] for s in SCENARIOS])
def test_reward_scenario(scenario):
    terms = evaluate(scenario)
    for name, expected in scenario["expected"].items():
        assert float(terms[name]) == pytest.approx(expected, rel=1e-9, abs=1e-12), name

def test_total_is_sum_of_terms():
    for scenario in SCENARIOS:
        terms = evaluate(scenario)
        names = GRASP_TERMS if scenario["task"] == "grasp" else ROTATION_TERMS
        assert float(terms["total"]) == pytest.approx(sum(float(terms[n]) for n in names), abs=1e-12)

def test_batched_terms_match_single_scenarios():
    grasp = [s for s in SCENARIOS if s["task"] == "grasp" and "cfg" not in s]
    rows = [{**TABLE["defaults"]["grasp"], **s["inputs"]} for s in grasp]
    batch = {k: np.array([row[k] for row in rows]) for k in rows[0]}
    terms = grasp_reward_terms(**batch, cfg=GraspRewardConfig())
    for i, scenario in enumerate(grasp):
        single = evaluate(scenario)
        for name in GRASP_TERMS:
            assert terms[name][i] == pytest.approx(float(single[name]), abs=1e-12)

def test_one_sigma_gaussian():
    cfg = GraspRewardConfig(w_torque=1.0)
    contact = [False, True, False, False, False]
    assert torque_reward([0.5, 0.6, 0.5, 0.5, 0.5], contact, 0.5, cfg) == pytest.approx(np.exp(-0.5))

def test_force_reward_ignores_forces_without_contact():
    assert force_reward([50.0] * 5, [False] * 5, 0.5, GraspRewardConfig()) == 0.0

def test_penalty_examples():
    cfg = GraspRewardConfig(w_diff=1.0, w_outter=1.0)
    assert consistency_penalty([0.1] * 4, cfg) == 0.0
    assert consistency_penalty([0.0, 0.0, 0.0, 0.4], cfg) == pytest.approx(0.03)
    assert outer_penalty([1.1, 0.8, 0.8, 0.8], cfg) == pytest.approx(0.3)
    assert action_rate_penalty(np.full(12, 0.1), np.zeros(12), -0.0002) == pytest.approx(-2.4e-5)
    assert velocity_penalty(np.eye(12)[3], -0.0005) == -0.0005

def test_rotation_examples():
    cfg = RotationRewardConfig()
    assert rotation_reward(0.2, 0.05, cfg) == pytest.approx(1.0 / 0.3 * 0.5)
    assert rotation_reward(0.2, 0.1, cfg) < 1e-8
    assert rotation_reward(0.1, 0.0, cfg) == pytest.approx(5.0, rel=1e-8)
    assert goal_bonus(0.2, 0.01, cfg) == 250.0
    assert goal_bonus(0.3, 0.01, cfg) == 0.0
    assert goal_bonus(0.1, 0.06, cfg) == 0.0

@pytest.mark.parametrize(
    ("cls", "data", "path"),
    [
        (GraspRewardConfig, {"sigma": 0.0}, "rewards.sigma"),
        (GraspRewardConfig, {"torque_range": [1.1, 0.01]}, "rewards.torque_range"),
        (GraspRewardConfig, {"w_bonus": 1.0}, "rewards.w_bonus"),
        (RotationRewardConfig, {"eps_rot": 0.0}, "rewards.eps_rot"),
    ],
)
def test_invalid_reward_config(cls, data, path):
    with pytest.raises(ConfigError) as e:
        cls.from_dict(data)
    assert e.value.path == path
