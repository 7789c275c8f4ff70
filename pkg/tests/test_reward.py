import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mlpcpg.env import EnvConfig, Goal, RobotState
from mlpcpg.kinematics import HIP_OFFSETS
from mlpcpg.reward import REWARD_TERMS, WEIGHT_TOTAL, WEIGHTS, compute_reward, rbf_kernel

CFG = EnvConfig()
GOAL = Goal(vx=1.2, vy=-0.3, yaw_rate=0.4)


def perfect_state(goal=GOAL, cfg=CFG) -> RobotState:
    base = np.array([0.7, -0.2, cfg.desired_base_height])
    hips = base + HIP_OFFSETS
    feet = hips.copy()
    feet[:, 2] = 0.0
    return RobotState(
        position=base, euler=np.zeros(3), quaternion=np.array([1.0, 0, 0, 0]),
        lin_vel=np.array([goal.vx, goal.vy, 0.0]), ang_vel=np.array([0.0, 0.0, goal.yaw_rate]),
        gravity=np.array([0.0, 0.0, -1.0]), q=np.zeros(12), qd=np.zeros(12), tau=np.zeros(12),
        feet_pos=feet, feet_vel=np.zeros((4, 3)), hips_pos=hips,
        contacts=np.ones(4, dtype=bool))


def test_weights_table():
    assert WEIGHT_TOTAL == 31
    assert WEIGHTS["forward_velocity"] == 8 / 31
    assert sum(n for n, _ in REWARD_TERMS.values()) == 31
    assert len(REWARD_TERMS) == 15


def test_perfect_state_scores_exactly_one():
    r = compute_reward(perfect_state(), GOAL, CFG)
    assert r.total == 1.0
    assert all(v == 1.0 for v in r.terms.values())


# (field edit, term, hand-computed kernel value)
PERTURBATIONS = [
    (lambda s: replace(s, lin_vel=s.lin_vel + [0.1, 0, 0]), "forward_velocity",
     math.exp(-4.6 * 0.01)),
    (lambda s: replace(s, lin_vel=s.lin_vel + [0, 0.2, 0]), "lateral_velocity",
     math.exp(-4.6 * 0.04)),
    (lambda s: replace(s, lin_vel=s.lin_vel + [0, 0, 0.3]), "vertical_velocity",
     math.exp(-4.6 * 0.09)),
    (lambda s: replace(s, ang_vel=s.ang_vel + [0.5, 0, 0]), "roll_rate", math.exp(-1.87 * 0.25)),
    (lambda s: replace(s, ang_vel=s.ang_vel + [0, -0.4, 0]), "pitch_rate", math.exp(-1.87 * 0.16)),
    (lambda s: replace(s, ang_vel=s.ang_vel + [0, 0, 0.3]), "yaw_rate", math.exp(-1.87 * 0.09)),
    (lambda s: replace(s, gravity=np.array([0.6, 0.0, -0.8])), "base_orientation",
     math.exp(-2.35 * (0.36 + 0.04))),
    (lambda s: replace(s, position=s.position + [0, 0, -0.05]), "base_height",
     math.exp(-51.17 * 0.0025)),
    (lambda s: replace(s, tau=np.r_[10.0, np.zeros(11)]), "joint_torque", math.exp(-0.001 * 100)),
    (lambda s: replace(s, qd=np.r_[np.zeros(11), 2.0]), "joint_velocity", math.exp(-0.026 * 4)),
    (lambda s: replace(s, body_contact=True), "ground_contact", 0.0),
    (lambda s: replace(s, self_collision=True), "self_collision", 0.0),
]


@pytest.mark.parametrize("edit,term,kernel", PERTURBATIONS, ids=[p[1] for p in PERTURBATIONS])
def test_single_term_perturbation(edit, term, kernel):
    state = edit(perfect_state())
    r = compute_reward(state, GOAL, CFG)
    assert r.terms[term] == pytest.approx(kernel, abs=1e-15)
    expected = 1.0 - REWARD_TERMS[term][0] / 31 * (1.0 - kernel)
    assert abs(r.total - expected) < 1e-12
    others = [v for k, v in r.terms.items() if k != term]
    assert all(v == 1.0 for v in others)


def test_swing_stance_term():
    s = perfect_state()
    vel = np.zeros((4, 3))
    vel[0] = [0.5, 0.0, 0.0]   # foot 0 moves at ground level: 0.075 below target height
    r = compute_reward(replace(s, feet_vel=vel), GOAL, CFG)
    kernel = math.exp(-460 * (0.075 * 0.5) ** 2)
    assert r.terms["swing_stance"] == pytest.approx((3 + kernel) / 4, abs=1e-15)
    assert abs(r.total - (1 - 2 / 31 * (1 - (3 + kernel) / 4))) < 1e-12


def test_foot_placement_term():
    s = perfect_state()
    feet = s.feet_pos.copy()
    feet[:, 0] += 0.1           # all feet shifted forward: both placement terms drop
    r = compute_reward(replace(s, feet_pos=feet), GOAL, CFG)
    k = math.exp(-51.17 * 0.01)
    assert r.terms["foot_placement"] == pytest.approx(k, abs=1e-15)
    assert r.terms["body_placement"] == pytest.approx(k, abs=1e-15)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-2, 2))
def test_total_in_unit_interval(dvx, dvy, dw):
    s = perfect_state()
    s = replace(s, lin_vel=s.lin_vel + [dvx, dvy, 0.0], ang_vel=s.ang_vel + [0, 0, dw])
    total = compute_reward(s, GOAL, CFG).total
    assert 0.0 < total <= 1.0
    if (dvx, dvy, dw) != (0.0, 0.0, 0.0):
        assert total < 1.0 or abs(dvx) + abs(dvy) + abs(dw) < 1e-6


def test_rbf_kernel():
    assert rbf_kernel([1.0, 2.0], [1.0, 2.0], -5.0) == 1.0
    assert rbf_kernel(0.0, 1.0, -1.0) == pytest.approx(math.exp(-1.0))
