"""Joint limits, action rescaling and the joint-level PD law."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cpg import N_LEGS

# hip roll, hip pitch, knee pitch
LEG_Q_MIN = (-0.523, -2.792, 0.698)
LEG_Q_MAX = (0.523, 0.349, 2.792)
LEG_TORQUE_LIMIT = (75.0, 75.0, 130.0)
VELOCITY_LIMIT = 19.0

Q_MIN = np.tile(LEG_Q_MIN, N_LEGS)
Q_MAX = np.tile(LEG_Q_MAX, N_LEGS)
TORQUE_LIMIT = np.tile(LEG_TORQUE_LIMIT, N_LEGS)

POLICY_HZ = 25
PD_HZ = 1000
PD_TICKS_PER_POLICY_TICK = PD_HZ // POLICY_HZ


@dataclass(frozen=True)
class PdConfig:
    kp: float = 300.0
    kd: float = 10.0
    torque_limit: np.ndarray = field(default_factory=lambda: TORQUE_LIMIT.copy())
    velocity_limit: float = VELOCITY_LIMIT

    def __post_init__(self):
        if self.kp <= 0 or self.kd <= 0:
            raise ValueError("PD gains must be positive")


def pd_torque(cfg: PdConfig, q_hat, q, q_dot) -> np.ndarray:
    """``tau = kp (q_hat - q) + kd (0 - q_dot)``, clipped to the actuator limits."""
    tau = cfg.kp * (np.asarray(q_hat) - np.asarray(q)) - cfg.kd * np.asarray(q_dot)
    return np.clip(tau, -cfg.torque_limit, cfg.torque_limit)


def squash_to_limits(a, q_min=Q_MIN, q_max=Q_MAX) -> np.ndarray:
    """Map ``a`` in ``[-1, 1]`` linearly onto the joint range."""
    return q_min + 0.5 * (np.asarray(a) + 1.0) * (q_max - q_min)


def limits_to_unit(q, q_min=Q_MIN, q_max=Q_MAX) -> np.ndarray:
    return 2.0 * (np.asarray(q) - q_min) / (q_max - q_min) - 1.0
