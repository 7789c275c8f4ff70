"""Task reward: a weighted sum of RBF kernels and two indicator terms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# name -> (weight numerator over 31, kernel width c)
REWARD_TERMS = {
    "forward_velocity": (8, -4.6),
    "lateral_velocity": (4, -4.6),
    "vertical_velocity": (1, -4.6),
    "roll_rate": (1, -1.87),
    "pitch_rate": (1, -1.87),
    "yaw_rate": (4, -1.87),
    "base_orientation": (2, -2.35),
    "base_height": (2, -51.17),
    "joint_torque": (1, -0.001),
    "joint_velocity": (1, -0.026),
    "ground_contact": (1, None),
    "self_collision": (1, None),
    "swing_stance": (2, -460.0),
    "body_placement": (1, -51.17),
    "foot_placement": (1, -51.17),
}
WEIGHT_TOTAL = sum(w for w, _ in REWARD_TERMS.values())
WEIGHTS = {name: w / WEIGHT_TOTAL for name, (w, _) in REWARD_TERMS.items()}


def rbf_kernel(x, x_hat, c: float) -> float:
    """``exp(c * |x_hat - x|^2)``; vectors use the squared Euclidean distance."""
    d = np.asarray(x_hat, dtype=float) - np.asarray(x, dtype=float)
    return float(np.exp(c * np.sum(d * d)))


@dataclass(frozen=True)
class RewardBreakdown:
    terms: dict
    total: float

    def weighted(self) -> dict:
        return {k: WEIGHTS[k] * v for k, v in self.terms.items()}


def reward_terms(state, goal, cfg) -> dict:
    c = {name: width for name, (_, width) in REWARD_TERMS.items()}
    v = state.lin_vel
    w = state.ang_vel
    feet_h = state.feet_pos[:, 2]
    clearance = (feet_h - cfg.desired_foot_height)[:, None] * state.feet_vel
    return {
        "forward_velocity": rbf_kernel(v[0], goal.vx, c["forward_velocity"]),
        "lateral_velocity": rbf_kernel(v[1], goal.vy, c["lateral_velocity"]),
        "vertical_velocity": rbf_kernel(v[2], 0.0, c["vertical_velocity"]),
        "roll_rate": rbf_kernel(w[0], 0.0, c["roll_rate"]),
        "pitch_rate": rbf_kernel(w[1], 0.0, c["pitch_rate"]),
        "yaw_rate": rbf_kernel(w[2], goal.yaw_rate, c["yaw_rate"]),
        "base_orientation": rbf_kernel(state.gravity, [0.0, 0.0, -1.0], c["base_orientation"]),
        "base_height": rbf_kernel(state.position[2], cfg.desired_base_height, c["base_height"]),
        "joint_torque": rbf_kernel(state.tau, 0.0, c["joint_torque"]),
        "joint_velocity": rbf_kernel(state.qd, 0.0, c["joint_velocity"]),
        "ground_contact": 0.0 if state.body_contact else 1.0,
        "self_collision": 0.0 if state.self_collision else 1.0,
        "swing_stance": float(np.mean([rbf_kernel(row, 0.0, c["swing_stance"])
                                       for row in clearance])),
        "body_placement": rbf_kernel(state.feet_pos[:, :2].mean(axis=0), state.position[:2],
                                     c["body_placement"]),
        "foot_placement": float(np.mean([
            rbf_kernel(pf, ph, c["foot_placement"])
            for pf, ph in zip(state.feet_pos[:, :2], state.hips_pos[:, :2])])),
    }


def compute_reward(state, goal, cfg) -> RewardBreakdown:
    terms = reward_terms(state, goal, cfg)
    # integer numerators keep the all-ones case exactly 1.0
    total = float(sum(REWARD_TERMS[k][0] * v for k, v in terms.items()) / WEIGHT_TOTAL)
    return RewardBreakdown(terms=terms, total=total)
