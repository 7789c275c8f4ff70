"""Leg and body kinematics of the quadruped.

Each leg is hip roll (about x) followed by hip pitch and knee pitch (about y),
with the thigh and shank hanging straight down at zero angles. Body frame:
x forward, y left, z up; hips sit at the corners of the body footprint.
"""

from __future__ import annotations

import numpy as np

UPPER_LEG = 0.33
LOWER_LEG = 0.34
BODY_LENGTH = 0.85
BODY_WIDTH = 0.30
BODY_HEIGHT = 0.30
BODY_MASS = 42.0

# FL, FR, RL, RR
HIP_OFFSETS = np.array([
    [BODY_LENGTH / 2, BODY_WIDTH / 2, 0.0],
    [BODY_LENGTH / 2, -BODY_WIDTH / 2, 0.0],
    [-BODY_LENGTH / 2, BODY_WIDTH / 2, 0.0],
    [-BODY_LENGTH / 2, -BODY_WIDTH / 2, 0.0],
])

BODY_CORNERS = np.array([[sx * BODY_LENGTH / 2, sy * BODY_WIDTH / 2, -BODY_HEIGHT / 2]
                         for sx in (1, -1) for sy in (1, -1)])


def leg_fk(q, l1: float = UPPER_LEG, l2: float = LOWER_LEG) -> np.ndarray:
    """Foot position relative to the hip for joint angles ``(..., 3)``."""
    q = np.asarray(q, dtype=float)
    roll, pitch, knee = q[..., 0], q[..., 1], q[..., 2]
    x = -l1 * np.sin(pitch) - l2 * np.sin(pitch + knee)
    z_plane = -l1 * np.cos(pitch) - l2 * np.cos(pitch + knee)
    return np.stack([x, -np.sin(roll) * z_plane, np.cos(roll) * z_plane], axis=-1)


def leg_jacobian(q, l1: float = UPPER_LEG, l2: float = LOWER_LEG) -> np.ndarray:
    """``d(foot)/d(q)`` with shape ``(..., 3, 3)``."""
    q = np.asarray(q, dtype=float)
    roll, pitch, knee = q[..., 0], q[..., 1], q[..., 2]
    s1, c1 = np.sin(pitch), np.cos(pitch)
    s12, c12 = np.sin(pitch + knee), np.cos(pitch + knee)
    sr, cr = np.sin(roll), np.cos(roll)
    z_plane = -l1 * c1 - l2 * c12
    dz_dp = l1 * s1 + l2 * s12
    dz_dk = l2 * s12
    zero = np.zeros_like(roll)
    jac = np.stack([
        np.stack([zero, -l1 * c1 - l2 * c12, -l2 * c12], axis=-1),
        np.stack([-cr * z_plane, -sr * dz_dp, -sr * dz_dk], axis=-1),
        np.stack([-sr * z_plane, cr * dz_dp, cr * dz_dk], axis=-1),
    ], axis=-2)
    return jac


def feet_in_body(q12) -> np.ndarray:
    """Foot positions in the body frame, shape ``(4, 3)``."""
    return HIP_OFFSETS + leg_fk(np.asarray(q12).reshape(4, 3))


def feet_velocity_in_body(q12, qd12) -> np.ndarray:
    jac = leg_jacobian(np.asarray(q12).reshape(4, 3))
    return np.einsum("nij,nj->ni", jac, np.asarray(qd12).reshape(4, 3))


def rotation_matrix(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Body-to-world rotation ``Rz(yaw) Ry(pitch) Rx(roll)``."""
    cr, sr = np.cos(roll), np.sin(roll)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cy, sy = np.cos(yaw), np.sin(yaw)
    return np.array([
        [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
        [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
        [-sp, cp * sr, cp * cr],
    ])


def quaternion_from_euler(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Unit quaternion ``(w, x, y, z)`` for the same rotation as :func:`rotation_matrix`."""
    cr, sr = np.cos(roll / 2), np.sin(roll / 2)
    cp, sp = np.cos(pitch / 2), np.sin(pitch / 2)
    cy, sy = np.cos(yaw / 2), np.sin(yaw / 2)
    return np.array([
        cr * cp * cy + sr * sp * sy,
        sr * cp * cy - cr * sp * sy,
        cr * sp * cy + sr * cp * sy,
        cr * cp * sy - sr * sp * cy,
    ])


def gravity_in_body(rot: np.ndarray) -> np.ndarray:
    return rot.T @ np.array([0.0, 0.0, -1.0])


def tilt_angle(gravity_body) -> float:
    """Angle between the body z-axis and vertical, from the projected gravity."""
    g = np.asarray(gravity_body, dtype=float)
    return float(np.arccos(np.clip(-g[2] / np.linalg.norm(g), -1.0, 1.0)))
