"""Compiled inner loop of the reduced-order backend (see :mod:`mlpcpg.env`)."""

from math import atan2, cos, sin

import numpy as np
from numba import njit


@njit(cache=True)
def _rotation(roll, pitch, yaw, rot):
    cr, sr = cos(roll), sin(roll)
    cp, sp = cos(pitch), sin(pitch)
    cy, sy = cos(yaw), sin(yaw)
    rot[0, 0] = cy * cp
    rot[0, 1] = cy * sp * sr - sy * cr
    rot[0, 2] = cy * sp * cr + sy * sr
    rot[1, 0] = sy * cp
    rot[1, 1] = sy * sp * sr + cy * cr
    rot[1, 2] = sy * sp * cr - cy * sr
    rot[2, 0] = -sp
    rot[2, 1] = cp * sr
    rot[2, 2] = cp * cr


@njit(cache=True)
def _feet(q, qd, hips, l1, l2, pos, vel):
    """Foot positions and joint-induced velocities in the body frame."""
    for n in range(4):
        roll, pitch, knee = q[3 * n], q[3 * n + 1], q[3 * n + 2]
        dr, dp, dk = qd[3 * n], qd[3 * n + 1], qd[3 * n + 2]
        s1, c1 = sin(pitch), cos(pitch)
        s12, c12 = sin(pitch + knee), cos(pitch + knee)
        sr, cr = sin(roll), cos(roll)
        zp = -l1 * c1 - l2 * c12
        dzp = (l1 * s1 + l2 * s12) * dp + l2 * s12 * dk
        pos[n, 0] = hips[n, 0] - l1 * s1 - l2 * s12
        pos[n, 1] = hips[n, 1] - sr * zp
        pos[n, 2] = hips[n, 2] + cr * zp
        vel[n, 0] = (-l1 * c1 - l2 * c12) * dp - l2 * c12 * dk
        vel[n, 1] = -cr * zp * dr - sr * dzp
        vel[n, 2] = -sr * zp * dr + cr * dzp


@njit(cache=True)
def simulate(q, qd, euler, pos, v_world, ang_vel, contacts, tau,
             q_hat, use_pd, kp, kd, torque_limit, q_min, q_max, velocity_limit,
             inertia, damping, attitude_tau, contact_tol, dt, n_ticks,
             hips, l1, l2, gravity):
    """Advance the robot in place by ``n_ticks`` physics ticks.

    With ``use_pd`` the torque is recomputed every tick from ``q_hat``;
    otherwise ``tau`` is held fixed. Returns the number of ticks executed.
    """
    rot = np.empty((3, 3))
    feet = np.empty((4, 3))
    feet_v = np.empty((4, 3))
    rel = np.empty((4, 3))
    ticks = 0
    for _ in range(n_ticks):
        # support centroid of the previous contact set, in the body frame
        n_contact = 0
        cx = 0.0
        cy = 0.0
        if use_pd:
            for j in range(12):
                t = kp * (q_hat[j] - q[j]) - kd * qd[j]
                if t > torque_limit[j]:
                    t = torque_limit[j]
                elif t < -torque_limit[j]:
                    t = -torque_limit[j]
                tau[j] = t
        _feet(q, qd, hips, l1, l2, feet, feet_v)
        for n in range(4):
            if contacts[n]:
                n_contact += 1
                cx += feet[n, 0]
                cy += feet[n, 1]
        was_supported = n_contact > 0

        # joints: damped inertia, velocity and position limits
        for j in range(12):
            v = qd[j] + dt * (tau[j] - damping * qd[j]) / inertia
            if v > velocity_limit:
                v = velocity_limit
            elif v < -velocity_limit:
                v = -velocity_limit
            x = q[j] + dt * v
            if x < q_min[j]:
                x = q_min[j]
                if v < 0.0:
                    v = 0.0
            elif x > q_max[j]:
                x = q_max[j]
                if v > 0.0:
                    v = 0.0
            q[j] = x
            qd[j] = v

        # attitude relaxes toward the support-balance attitude; held while airborne
        height = pos[2]
        if was_supported:
            cx /= n_contact
            cy /= n_contact
            ang_vel[0] = (atan2(cy, height) - euler[0]) / attitude_tau
            ang_vel[1] = (-atan2(cx, height) - euler[1]) / attitude_tau
        else:
            ang_vel[0] = 0.0
            ang_vel[1] = 0.0
        euler[0] += dt * ang_vel[0]
        euler[1] += dt * ang_vel[1]
        euler[2] += dt * ang_vel[2]
        _rotation(euler[0], euler[1], euler[2], rot)

        _feet(q, qd, hips, l1, l2, feet, feet_v)
        support = -1e300
        for n in range(4):
            for k in range(3):
                rel[n, k] = rot[k, 0] * feet[n, 0] + rot[k, 1] * feet[n, 1] + rot[k, 2] * feet[n, 2]
            if -rel[n, 2] > support:
                support = -rel[n, 2]

        # a stance leg cannot throw the body: no upward velocity survives lift-off
        vz = v_world[2]
        if was_supported and vz > 0.0:
            vz = 0.0
        vz_free = vz - gravity * dt
        h_free = height + vz_free * dt
        if h_free > support:
            pos[2] = h_free
            v_world[2] = vz_free
            for n in range(4):
                contacts[n] = False
        else:
            n_contact = 0
            vx = 0.0
            vy = 0.0
            tang = 0.0
            for n in range(4):
                contacts[n] = -rel[n, 2] >= support - contact_tol
                if contacts[n]:
                    n_contact += 1
                    rvx = rot[0, 0] * feet_v[n, 0] + rot[0, 1] * feet_v[n, 1] + rot[0, 2] * feet_v[n, 2]
                    rvy = rot[1, 0] * feet_v[n, 0] + rot[1, 1] * feet_v[n, 1] + rot[1, 2] * feet_v[n, 2]
                    vx += rvx
                    vy += rvy
                    rx, ry = rel[n, 0], rel[n, 1]
                    tang += (rx * rvy - ry * rvx) / (rx * rx + ry * ry)
            v_world[0] = -vx / n_contact
            v_world[1] = -vy / n_contact
            v_world[2] = (support - height) / dt
            ang_vel[2] = -tang / n_contact
            pos[2] = support
        pos[0] += dt * v_world[0]
        pos[1] += dt * v_world[1]
        ticks += 1
    return ticks
